//! Subtask predicates and the shaped, staged task reward.

use serde::{Deserialize, Serialize};

use crate::math::tanh;
pub use crate::physics::TaskGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardTask {
    /// Drag the object to the target band.
    #[default]
    Full,
    /// Reduced task: reaching the tool handle ends the episode.
    ReachTool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub k_s: f64,
    pub s_max: u32,
    /// Distance scale of the shaping terms; the arena width.
    pub k_w: f64,
    pub claw_length: f64,
    pub tool_tip_length: f64,
    pub boundary_thickness: f64,
    pub close_threshold: f64,
    pub open_threshold: f64,
    pub terminal_bonus: f64,
    pub task: RewardTask,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            k_s: 3.0,
            s_max: 500,
            k_w: 1.2,
            claw_length: 0.06,
            tool_tip_length: 0.16,
            boundary_thickness: 0.1,
            close_threshold: 0.02,
            open_threshold: 0.09,
            terminal_bonus: 300.0,
            task: RewardTask::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid reward config: {0}")]
pub struct RewardConfigError(pub &'static str);

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardConfigError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.k_s) || !pos(self.k_w) || self.s_max == 0 {
            return Err(RewardConfigError("k_s, k_w and s_max must be positive"));
        }
        if !(pos(self.close_threshold) && self.close_threshold < self.open_threshold) {
            return Err(RewardConfigError(
                "need 0 < close_threshold < open_threshold",
            ));
        }
        if !(pos(self.claw_length) && pos(self.tool_tip_length) && pos(self.boundary_thickness)) {
            return Err(RewardConfigError("lengths must be positive"));
        }
        if !(self.terminal_bonus.is_finite() && self.terminal_bonus >= 0.0) {
            return Err(RewardConfigError("terminal_bonus must be >= 0"));
        }
        Ok(())
    }
}

/// Bitset over req1..req4; bit `i` is `req(i+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Predicates(pub u8);

impl Predicates {
    pub fn new(req1: bool, req2: bool, req3: bool, req4: bool) -> Self {
        Self(req1 as u8 | (req2 as u8) << 1 | (req3 as u8) << 2 | (req4 as u8) << 3)
    }

    pub fn req(self, i: usize) -> bool {
        debug_assert!((1..=4).contains(&i));
        self.0 >> (i - 1) & 1 == 1
    }

    pub fn req1(self) -> bool {
        self.req(1)
    }

    pub fn req2(self) -> bool {
        self.req(2)
    }

    pub fn req3(self) -> bool {
        self.req(3)
    }

    pub fn req4(self) -> bool {
        self.req(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Terminal,
    ToolReachObject,
    GraspTool,
    ReachTool,
    Approach,
}

impl Branch {
    pub const ALL: [Branch; 5] = [
        Branch::Terminal,
        Branch::ToolReachObject,
        Branch::GraspTool,
        Branch::ReachTool,
        Branch::Approach,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub value: f64,
    pub predicates: Predicates,
    pub branch: Branch,
    /// `r_c1`, `r_c2`, `r_c3`.
    pub terms: [f64; 3],
    pub step: u32,
}

impl RewardBreakdown {
    /// Value implied by the stored branch and terms.
    pub fn recompute(&self, cfg: &RewardConfig) -> f64 {
        branch_value(self.branch, self.terms, self.step, cfg)
    }

    pub fn is_terminal(&self) -> bool {
        self.branch == Branch::Terminal
    }
}

fn shaping(d: f64, k_w: f64) -> f64 {
    let t = tanh(d / k_w);
    1.0 - t * t
}

pub fn eval_predicates(g: &TaskGeometry, cfg: &RewardConfig) -> Predicates {
    let req1 = g.p_g.distance(g.p_h) < 0.5 * cfg.claw_length;
    let gap = g.p_l.distance(g.p_r);
    let req2 = req1 && cfg.close_threshold < gap && gap < cfg.open_threshold;
    let req3 = req2 && g.p_e.distance(g.p_o) < 0.5 * cfg.tool_tip_length;
    let req4 = g.p_o.distance(g.p_t) < 0.5 * cfg.boundary_thickness;
    Predicates::new(req1, req2, req3, req4)
}

pub fn shaping_terms(g: &TaskGeometry, cfg: &RewardConfig) -> [f64; 3] {
    [
        shaping(g.p_g.distance(g.p_h), cfg.k_w),
        shaping(g.p_e.distance(g.p_o), cfg.k_w),
        shaping(g.p_o.distance(g.p_t), cfg.k_w),
    ]
}

pub fn select_branch(p: Predicates, task: RewardTask) -> Branch {
    match task {
        RewardTask::Full => {
            if p.req4() {
                Branch::Terminal
            } else if p.req3() {
                Branch::ToolReachObject
            } else if p.req2() {
                Branch::GraspTool
            } else if p.req1() {
                Branch::ReachTool
            } else {
                Branch::Approach
            }
        }
        RewardTask::ReachTool => {
            if p.req1() {
                Branch::Terminal
            } else {
                Branch::Approach
            }
        }
    }
}

fn branch_value(branch: Branch, [r1, r2, r3]: [f64; 3], step: u32, cfg: &RewardConfig) -> f64 {
    match branch {
        Branch::Terminal => {
            let left = cfg.s_max.saturating_sub(step) as f64;
            cfg.terminal_bonus + cfg.k_s * left
        }
        Branch::ToolReachObject => 1.5 + 1.5 * r3,
        Branch::GraspTool => 0.25 + 1.25 * r2,
        Branch::ReachTool => 0.125,
        Branch::Approach => 0.125 * r1,
    }
}

/// The staged reward at step `step` of the episode.
pub fn compute_reward(g: &TaskGeometry, step: u32, cfg: &RewardConfig) -> RewardBreakdown {
    let predicates = eval_predicates(g, cfg);
    let terms = shaping_terms(g, cfg);
    let branch = select_branch(predicates, cfg.task);
    RewardBreakdown {
        value: branch_value(branch, terms, step, cfg),
        predicates,
        branch,
        terms,
        step,
    }
}

/// Whether the episode's goal is met.
pub fn is_success(p: Predicates, task: RewardTask) -> bool {
    select_branch(p, task) == Branch::Terminal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec2;

    fn far() -> TaskGeometry {
        let z = Vec2::new(0.6, 0.5);
        TaskGeometry {
            p_g: Vec2::new(0.1, 0.9),
            p_l: Vec2::new(0.1, 0.95),
            p_r: Vec2::new(0.1, 0.85),
            p_h: Vec2::new(0.9, 0.9),
            p_e: z,
            p_o: Vec2::new(1.0, 0.6),
            p_t: Vec2::new(1.0, 0.0),
        }
    }

    #[test]
    fn coincident_pinch_and_handle_reaches() {
        let mut g = far();
        g.p_h = g.p_g;
        assert!(eval_predicates(&g, &RewardConfig::default()).req1());
    }

    #[test]
    fn grasp_needs_reach() {
        let g = far();
        let p = eval_predicates(&g, &RewardConfig::default());
        assert!(!p.req1() && !p.req2());
    }

    #[test]
    fn object_on_target_only_sets_req4() {
        let mut g = far();
        g.p_o = Vec2::new(1.0, 0.01);
        assert_eq!(
            eval_predicates(&g, &RewardConfig::default()),
            Predicates(0b1000)
        );
    }

    #[test]
    fn terminal_values() {
        let mut g = far();
        g.p_o = Vec2::new(1.0, 0.01);
        let cfg = RewardConfig::default();
        assert_eq!(compute_reward(&g, 400, &cfg).value, 600.0);
        assert_eq!(compute_reward(&g, 500, &cfg).value, 300.0);
    }

    #[test]
    fn shaping_scalar_values() {
        let cfg = RewardConfig::default();
        assert_eq!(shaping(0.0, cfg.k_w), 1.0);
        assert!((shaping(cfg.k_w, cfg.k_w) - 0.419_974_341_614_026_1).abs() < 1e-12);
        let mut g = far();
        g.p_h = g.p_g + Vec2::new(cfg.k_w, 0.0);
        let r = compute_reward(&g, 0, &cfg);
        assert_eq!(r.branch, Branch::Approach);
        assert!((r.value - 0.052_496_792_701_753_27).abs() < 1e-12);
    }

    #[test]
    fn tool_reach_object_value() {
        let cfg = RewardConfig::default();
        let mut g = far();
        g.p_h = g.p_g;
        g.p_l = g.p_g + Vec2::new(0.0, 0.025);
        g.p_r = g.p_g - Vec2::new(0.0, 0.025);
        g.p_o = Vec2::new(1.0, 0.6);
        g.p_t = Vec2::new(1.0, 0.6 - cfg.k_w / 2.0);
        g.p_e = g.p_o;
        let r = compute_reward(&g, 10, &cfg);
        assert_eq!(r.branch, Branch::ToolReachObject);
        assert!(
            (r.value - 2.679_671_599_448_891).abs() < 1e-12,
            "{}",
            r.value
        );
        assert_eq!(r.recompute(&cfg), r.value);
    }

    #[test]
    fn reduced_task_ends_on_reach() {
        let cfg = RewardConfig {
            task: RewardTask::ReachTool,
            ..RewardConfig::default()
        };
        let mut g = far();
        g.p_h = g.p_g;
        let r = compute_reward(&g, 100, &cfg);
        assert!(r.is_terminal());
        assert_eq!(r.value, 300.0 + 3.0 * 400.0);
        assert!(is_success(r.predicates, cfg.task));
    }
}
