use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toolrl_core::math::Vec2;
use toolrl_core::reward::{compute_reward, Branch, RewardConfig, TaskGeometry};

/// Straight transcription of the staged reward, written against std f64.
fn oracle(g: &TaskGeometry, s_k: u32, c: &RewardConfig) -> (f64, Branch) {
    let d = |a: Vec2, b: Vec2| (a.x - b.x).hypot(a.y - b.y);
    let rc = |x: f64| 1.0 - (x / c.k_w).tanh().powi(2);
    let r1 = d(g.p_g, g.p_h) < c.claw_length / 2.0;
    let gap = d(g.p_l, g.p_r);
    let r2 = r1 && (c.close_threshold < gap && gap < c.open_threshold);
    let r3 = r2 && d(g.p_e, g.p_o) < c.tool_tip_length / 2.0;
    let r4 = d(g.p_o, g.p_t) < c.boundary_thickness / 2.0;
    if r4 {
        (
            300.0 + c.k_s * (c.s_max as f64 - s_k as f64),
            Branch::Terminal,
        )
    } else if r3 {
        (1.5 + 1.5 * rc(d(g.p_o, g.p_t)), Branch::ToolReachObject)
    } else if r2 {
        (0.25 + 1.25 * rc(d(g.p_e, g.p_o)), Branch::GraspTool)
    } else if r1 {
        (0.125, Branch::ReachTool)
    } else {
        (0.125 * rc(d(g.p_g, g.p_h)), Branch::Approach)
    }
}

fn near(rng: &mut ChaCha8Rng, p: Vec2, scale: f64) -> Vec2 {
    let r = rng.random_range(0.0..scale);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    p + Vec2::new(r * a.cos(), r * a.sin())
}

/// Geometry biased so every branch fires often.
fn random_geometry(rng: &mut ChaCha8Rng) -> TaskGeometry {
    let arena =
        |rng: &mut ChaCha8Rng| Vec2::new(rng.random_range(0.0..1.2), rng.random_range(0.0..1.0));
    let p_g = arena(rng);
    let p_h = if rng.random_bool(0.6) {
        near(rng, p_g, 0.05)
    } else {
        arena(rng)
    };
    let opening = rng.random_range(0.0..0.12);
    let axis = rng.random_range(0.0..std::f64::consts::TAU);
    let half = Vec2::new(-axis.sin(), axis.cos()) * (opening / 2.0);
    let p_o = arena(rng);
    let p_e = if rng.random_bool(0.6) {
        near(rng, p_o, 0.12)
    } else {
        arena(rng)
    };
    let p_t = Vec2::new(p_o.x, 0.0);
    let p_o = if rng.random_bool(0.2) {
        Vec2::new(p_o.x, rng.random_range(0.0..0.08))
    } else {
        p_o
    };
    TaskGeometry {
        p_g,
        p_l: p_g + half,
        p_r: p_g - half,
        p_h,
        p_e,
        p_o,
        p_t,
    }
}

#[test]
fn matches_oracle_on_random_inputs() {
    let cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = [0usize; 5];
    for _ in 0..10_000 {
        let g = random_geometry(&mut rng);
        let s_k = rng.random_range(0..=cfg.s_max);
        let r = compute_reward(&g, s_k, &cfg);
        let (v, b) = oracle(&g, s_k, &cfg);
        assert_eq!(r.branch, b, "{g:?}");
        assert!(
            (r.value - v).abs() <= 1e-12 * v.abs().max(1e-300),
            "{} vs {v}",
            r.value
        );
        assert_eq!(r.recompute(&cfg), r.value);
        // Exactly one branch fires.
        assert_eq!(Branch::ALL.iter().filter(|x| **x == r.branch).count(), 1);
        seen[Branch::ALL.iter().position(|x| *x == r.branch).unwrap()] += 1;
        if r.branch == Branch::Terminal {
            assert!((300.0..=300.0 + cfg.k_s * cfg.s_max as f64).contains(&r.value));
        } else {
            assert!(r.value > 0.0 && r.value < 3.0, "{}", r.value);
        }
    }
    assert!(seen.iter().all(|n| *n > 100), "branch coverage {seen:?}");
}

#[test]
fn target_outcome_ignores_gripper() {
    let cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let mut g = random_geometry(&mut rng);
        g.p_o = Vec2::new(g.p_o.x, 0.01);
        g.p_t = Vec2::new(g.p_o.x, 0.0);
        assert!(compute_reward(&g, 0, &cfg).predicates.req4());
        g.p_g = Vec2::new(50.0, -40.0);
        g.p_h = Vec2::new(-30.0, 70.0);
        assert!(compute_reward(&g, 0, &cfg).predicates.req4());
    }
}

#[test]
fn shaping_is_monotone() {
    let cfg = RewardConfig::default();
    let base = TaskGeometry {
        p_g: Vec2::ZERO,
        p_l: Vec2::ZERO,
        p_r: Vec2::ZERO,
        p_h: Vec2::ZERO,
        p_e: Vec2::ZERO,
        p_o: Vec2::new(0.5, 0.5),
        p_t: Vec2::new(0.5, 0.0),
    };
    let mut last = f64::INFINITY;
    for i in 1..200 {
        let mut g = base;
        g.p_h = Vec2::new(i as f64 * 0.01, 0.0);
        let r = toolrl_core::reward::shaping_terms(&g, &cfg)[0];
        assert!(r < last && r > 0.0 && r <= 1.0);
        last = r;
    }
}
