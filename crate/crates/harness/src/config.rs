//! Flat `key = value` experiment configs.
//!
//! One assignment per line, `#` starts a comment, list values are
//! comma-separated. Integer seed lists also accept `a..b` (end exclusive).

use crate::error::{HarnessError, Result};
use negucb_core::baselines::JointKernel;
use negucb_core::KernelSpec;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    MultiIssue,
    Allocation,
    Trading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    NegUcb,
    LinUcb,
    KernelUcb,
    FactorUcb,
    Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ProposeOnly,
    Alternating,
}

/// Multi-issue sizes: fixed, or drawn per domain seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IssueSizes {
    Fixed(Vec<usize>),
    /// 2 to `max_issues` issues of 2 to 26 values each.
    Random { max_issues: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    pub agent: AgentKind,
    pub context_kernels: Vec<KernelSpec>,
    pub hidden_kernels: Vec<KernelSpec>,
    pub joint_kernel: JointKernel,
    pub lambda_context: f64,
    pub lambda_hidden: f64,
    /// Tied `alpha_context = alpha_hidden` grid; ignored when either
    /// separate list is given.
    pub alphas: Vec<f64>,
    pub alpha_context: Option<Vec<f64>>,
    pub alpha_hidden: Option<Vec<f64>>,
    /// Proposals in the allocation stream.
    pub steps: usize,
    /// Negotiations in episodic tasks.
    pub episodes: usize,
    pub max_rounds: usize,
    pub seeds: Vec<u64>,
    /// Fixed domain seed; by default each replication seed draws its own domain.
    pub domain_seed: Option<u64>,
    pub mode: Mode,
    pub subsample: Option<usize>,
    pub rule_top_fraction: f64,
    pub counter_top_fraction: f64,
    // allocation
    pub categories: usize,
    pub max_count: usize,
    pub category_counts: Option<Vec<usize>>,
    pub pairs: usize,
    // multi-issue
    pub issue_sizes: IssueSizes,
    pub opposition: f64,
    pub threshold_quantile: f64,
    // trading
    pub items: usize,
    pub trading_pairs: usize,
    pub gamma: usize,
    pub hold_probability: f64,
    pub min_cost: f64,
    pub max_cost: f64,
    pub hidden_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            task: Task::Allocation,
            agent: AgentKind::NegUcb,
            context_kernels: vec![KernelSpec::poly2()],
            hidden_kernels: vec![KernelSpec::poly2()],
            joint_kernel: JointKernel::Product,
            lambda_context: 1.0,
            lambda_hidden: 1.0,
            alphas: vec![0.1],
            alpha_context: None,
            alpha_hidden: None,
            steps: 2000,
            episodes: 10,
            max_rounds: negucb_core::episode::DEFAULT_MAX_ROUNDS,
            seeds: vec![0],
            domain_seed: None,
            mode: Mode::ProposeOnly,
            subsample: None,
            rule_top_fraction: 0.1,
            counter_top_fraction: 0.1,
            categories: 3,
            max_count: 5,
            category_counts: None,
            pairs: 30,
            issue_sizes: IssueSizes::Fixed(vec![6, 12, 5, 26]),
            opposition: 0.5,
            threshold_quantile: 0.5,
            items: 87,
            trading_pairs: 6,
            gamma: 4,
            hold_probability: 0.5,
            min_cost: 50.0,
            max_cost: 300.0,
            hidden_scale: 0.2,
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub alpha_context: f64,
    pub alpha_hidden: f64,
    pub context_kernel: KernelSpec,
    pub hidden_kernel: KernelSpec,
}

/// Raw assignments with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| HarnessError::Parse { line, message: format!("expected `key = value`, got `{body}`") })?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(HarnessError::Parse { line, message: format!("bad key `{k}`") });
            }
            if entries.insert(k.to_string(), (line, v.trim().to_string())).is_some() {
                return Err(HarnessError::Parse { line, message: format!("duplicate key `{k}`") });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.0)
    }
}

fn err(kv: &KeyValues, key: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse { line: kv.line(key), message: format!("`{key}`: {}", message.into()) }
}

fn scalar<T: FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>> {
    kv.get(key)
        .map(|v| v.parse::<T>().map_err(|_| err(kv, key, format!("cannot parse `{v}`"))))
        .transpose()
}

fn list<T: FromStr>(kv: &KeyValues, key: &str) -> Result<Option<Vec<T>>> {
    kv.get(key)
        .map(|v| {
            v.split(',')
                .map(|s| s.trim().parse::<T>().map_err(|_| err(kv, key, format!("cannot parse `{}`", s.trim()))))
                .collect()
        })
        .transpose()
}

fn seeds(kv: &KeyValues, key: &str) -> Result<Option<Vec<u64>>> {
    let Some(v) = kv.get(key) else { return Ok(None) };
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim) {
        let bad = || err(kv, key, format!("cannot parse `{part}`"));
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(Some(out))
}

const KNOWN: &[&str] = &[
    "name", "task", "agent", "context_kernel", "hidden_kernel", "joint_kernel", "lambda_context", "lambda_hidden",
    "alpha", "alpha_context", "alpha_hidden", "steps", "episodes", "max_rounds", "seeds", "domain_seed", "mode",
    "subsample", "rule_top_fraction", "counter_top_fraction", "categories", "max_count", "category_counts", "pairs",
    "issue_sizes", "opposition", "threshold_quantile", "items", "trading_pairs", "gamma", "hold_probability",
    "min_cost", "max_cost", "hidden_scale",
];

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "multiissue" => Ok(Task::MultiIssue),
            "allocation" => Ok(Task::Allocation),
            "trading" => Ok(Task::Trading),
            _ => Err(s.into()),
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "negucb" => Ok(AgentKind::NegUcb),
            "linucb" => Ok(AgentKind::LinUcb),
            "kernelucb" => Ok(AgentKind::KernelUcb),
            "factorucb" => Ok(AgentKind::FactorUcb),
            "rule" => Ok(AgentKind::Rule),
            _ => Err(s.into()),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::MultiIssue => "multiissue",
            Task::Allocation => "allocation",
            Task::Trading => "trading",
        })
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::NegUcb => "negucb",
            AgentKind::LinUcb => "linucb",
            AgentKind::KernelUcb => "kernelucb",
            AgentKind::FactorUcb => "factorucb",
            AgentKind::Rule => "rule",
        })
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        if let Some(k) = kv.entries.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(err(kv, k, "unknown key"));
        }
        let mut c = Self::default();
        if let Some(v) = kv.get("name") {
            if v.is_empty() || v.contains(['/', '\\']) {
                return Err(err(kv, "name", "must be a non-empty plain file name"));
            }
            c.name = v.into();
        }
        match kv.get("task") {
            Some(v) => c.task = v.parse().map_err(|_| err(kv, "task", "expected multiissue, allocation or trading"))?,
            None => return Err(HarnessError::Parse { line: 0, message: "missing required key `task`".into() }),
        }
        if let Some(v) = kv.get("agent") {
            c.agent = v.parse().map_err(|_| err(kv, "agent", "expected negucb, linucb, kernelucb, factorucb or rule"))?;
        }
        let kernels = |key: &str| -> Result<Option<Vec<KernelSpec>>> {
            kv.get(key)
                .map(|v| v.split(',').map(|s| s.parse::<KernelSpec>().map_err(|e| err(kv, key, e.to_string()))).collect())
                .transpose()
        };
        if let Some(k) = kernels("context_kernel")? {
            c.context_kernels = k;
        }
        if let Some(k) = kernels("hidden_kernel")? {
            c.hidden_kernels = k;
        }
        if let Some(v) = kv.get("joint_kernel") {
            c.joint_kernel = match v {
                "product" => JointKernel::Product,
                "concat" => JointKernel::Concat,
                _ => return Err(err(kv, "joint_kernel", "expected product or concat")),
            };
        }
        macro_rules! set {
            ($field:ident, $key:literal) => {
                if let Some(v) = scalar(kv, $key)? {
                    c.$field = v;
                }
            };
        }
        set!(lambda_context, "lambda_context");
        set!(lambda_hidden, "lambda_hidden");
        if let Some(v) = list(kv, "alpha")? {
            c.alphas = v;
        }
        c.alpha_context = list(kv, "alpha_context")?;
        c.alpha_hidden = list(kv, "alpha_hidden")?;
        set!(steps, "steps");
        set!(episodes, "episodes");
        set!(max_rounds, "max_rounds");
        if let Some(v) = seeds(kv, "seeds")? {
            c.seeds = v;
        }
        c.domain_seed = scalar(kv, "domain_seed")?;
        if let Some(v) = kv.get("mode") {
            c.mode = match v {
                "propose_only" => Mode::ProposeOnly,
                "alternating" => Mode::Alternating,
                _ => return Err(err(kv, "mode", "expected propose_only or alternating")),
            };
        }
        c.subsample = match kv.get("subsample") {
            None | Some("none") => None,
            Some(_) => scalar(kv, "subsample")?,
        };
        set!(rule_top_fraction, "rule_top_fraction");
        set!(counter_top_fraction, "counter_top_fraction");
        set!(categories, "categories");
        set!(max_count, "max_count");
        c.category_counts = list(kv, "category_counts")?;
        set!(pairs, "pairs");
        if let Some(v) = kv.get("issue_sizes") {
            c.issue_sizes = match v.strip_prefix("random") {
                Some("") => IssueSizes::Random { max_issues: 4 },
                Some(rest) => {
                    let n = rest.strip_prefix(':').and_then(|n| n.trim().parse().ok());
                    IssueSizes::Random { max_issues: n.ok_or_else(|| err(kv, "issue_sizes", "expected random:<max issues>"))? }
                }
                None => IssueSizes::Fixed(list(kv, "issue_sizes")?.unwrap_or_default()),
            };
        }
        set!(opposition, "opposition");
        set!(threshold_quantile, "threshold_quantile");
        set!(items, "items");
        set!(trading_pairs, "trading_pairs");
        set!(gamma, "gamma");
        set!(hold_probability, "hold_probability");
        set!(min_cost, "min_cost");
        set!(max_cost, "max_cost");
        set!(hidden_scale, "hidden_scale");
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str, m: &str| HarnessError::Key { key: k.into(), message: m.into() };
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lambda_context) {
            return Err(key("lambda_context", "must be positive"));
        }
        if !positive(self.lambda_hidden) {
            return Err(key("lambda_hidden", "must be positive"));
        }
        let alphas = [("alpha", Some(&self.alphas)), ("alpha_context", self.alpha_context.as_ref()), ("alpha_hidden", self.alpha_hidden.as_ref())];
        for (k, v) in alphas {
            if let Some(v) = v {
                if v.is_empty() {
                    return Err(key(k, "empty grid"));
                }
                if v.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                    return Err(key(k, "must be non-negative"));
                }
            }
        }
        if self.context_kernels.is_empty() || self.hidden_kernels.is_empty() {
            return Err(key("context_kernel", "empty grid"));
        }
        if self.seeds.is_empty() {
            return Err(key("seeds", "at least one seed is required"));
        }
        if self.max_rounds == 0 {
            return Err(key("max_rounds", "must be positive"));
        }
        if self.subsample == Some(0) {
            return Err(key("subsample", "must be positive"));
        }
        for (k, f) in [("rule_top_fraction", self.rule_top_fraction), ("counter_top_fraction", self.counter_top_fraction)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(key(k, "must lie in (0, 1]"));
            }
        }
        match self.task {
            Task::Allocation => {
                if self.steps == 0 {
                    return Err(key("steps", "must be positive"));
                }
                if self.pairs == 0 || self.categories == 0 || self.max_count == 0 {
                    return Err(key("pairs", "pairs, categories and max_count must be positive"));
                }
            }
            Task::MultiIssue | Task::Trading => {
                if self.episodes == 0 {
                    return Err(key("episodes", "must be positive"));
                }
            }
        }
        match (&self.task, &self.issue_sizes) {
            (Task::MultiIssue, IssueSizes::Fixed(s)) if s.is_empty() || s.contains(&0) => {
                Err(key("issue_sizes", "needs at least one issue, each with a value"))
            }
            (Task::MultiIssue, IssueSizes::Random { max_issues }) if *max_issues < 2 => {
                Err(key("issue_sizes", "random domains need at least 2 issues"))
            }
            (Task::MultiIssue, _) if !(0.0..=1.0).contains(&self.threshold_quantile) => {
                Err(key("threshold_quantile", "must lie in [0, 1]"))
            }
            (Task::Trading, _) if self.items == 0 || self.trading_pairs == 0 || self.gamma == 0 => {
                Err(key("items", "items, trading_pairs and gamma must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// The cross product of the swept parameters, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let tied = self.alpha_context.is_none() && self.alpha_hidden.is_none();
        let alpha_pairs: Vec<(f64, f64)> = if tied {
            self.alphas.iter().map(|&a| (a, a)).collect()
        } else {
            let ac = self.alpha_context.clone().unwrap_or_else(|| self.alphas.clone());
            let ah = self.alpha_hidden.clone().unwrap_or_else(|| self.alphas.clone());
            ac.iter().flat_map(|&a| ah.iter().map(move |&b| (a, b))).collect()
        };
        let mut out = Vec::new();
        for &context_kernel in &self.context_kernels {
            for &hidden_kernel in &self.hidden_kernels {
                for &(alpha_context, alpha_hidden) in &alpha_pairs {
                    out.push(Cell { alpha_context, alpha_hidden, context_kernel, hidden_kernel });
                }
            }
        }
        out
    }
}

impl fmt::Display for ExperimentConfig {
    /// Renders the config in the format [`ExperimentConfig::from_text`] reads.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "task = {}", self.task)?;
        writeln!(f, "agent = {}", self.agent)?;
        writeln!(f, "context_kernel = {}", join(&self.context_kernels))?;
        writeln!(f, "hidden_kernel = {}", join(&self.hidden_kernels))?;
        let joint = match self.joint_kernel {
            JointKernel::Product => "product",
            JointKernel::Concat => "concat",
        };
        writeln!(f, "joint_kernel = {joint}")?;
        writeln!(f, "lambda_context = {}", self.lambda_context)?;
        writeln!(f, "lambda_hidden = {}", self.lambda_hidden)?;
        writeln!(f, "alpha = {}", join(&self.alphas))?;
        if let Some(a) = &self.alpha_context {
            writeln!(f, "alpha_context = {}", join(a))?;
        }
        if let Some(a) = &self.alpha_hidden {
            writeln!(f, "alpha_hidden = {}", join(a))?;
        }
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "episodes = {}", self.episodes)?;
        writeln!(f, "max_rounds = {}", self.max_rounds)?;
        writeln!(f, "seeds = {}", join(&self.seeds))?;
        if let Some(s) = self.domain_seed {
            writeln!(f, "domain_seed = {s}")?;
        }
        let mode = match self.mode {
            Mode::ProposeOnly => "propose_only",
            Mode::Alternating => "alternating",
        };
        writeln!(f, "mode = {mode}")?;
        match self.subsample {
            Some(s) => writeln!(f, "subsample = {s}")?,
            None => writeln!(f, "subsample = none")?,
        }
        writeln!(f, "rule_top_fraction = {}", self.rule_top_fraction)?;
        writeln!(f, "counter_top_fraction = {}", self.counter_top_fraction)?;
        writeln!(f, "categories = {}", self.categories)?;
        writeln!(f, "max_count = {}", self.max_count)?;
        if let Some(c) = &self.category_counts {
            writeln!(f, "category_counts = {}", join(c))?;
        }
        writeln!(f, "pairs = {}", self.pairs)?;
        match &self.issue_sizes {
            IssueSizes::Fixed(s) => writeln!(f, "issue_sizes = {}", join(s))?,
            IssueSizes::Random { max_issues } => writeln!(f, "issue_sizes = random:{max_issues}")?,
        }
        writeln!(f, "opposition = {}", self.opposition)?;
        writeln!(f, "threshold_quantile = {}", self.threshold_quantile)?;
        writeln!(f, "items = {}", self.items)?;
        writeln!(f, "trading_pairs = {}", self.trading_pairs)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "hold_probability = {}", self.hold_probability)?;
        writeln!(f, "min_cost = {}", self.min_cost)?;
        writeln!(f, "max_cost = {}", self.max_cost)?;
        writeln!(f, "hidden_scale = {}", self.hidden_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_ranges() {
        let c = ExperimentConfig::from_text(
            "# allocation sweep\ntask = allocation\nagent = negucb  # the learner\nalpha = 0, 0.1, 1\nseeds = 0..3, 7\n",
        )
        .unwrap();
        assert_eq!(c.task, Task::Allocation);
        assert_eq!(c.alphas, vec![0.0, 0.1, 1.0]);
        assert_eq!(c.seeds, vec![0, 1, 2, 7]);
        assert_eq!(c.cells().len(), 3);
    }

    #[test]
    fn errors_carry_line_and_key() {
        let e = ExperimentConfig::from_text("task = allocation\n\nlambda_context = x\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("lambda_context"), "{msg}");
        let e = ExperimentConfig::from_text("task = allocation\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"));
        assert!(matches!(ExperimentConfig::from_text("task allocation"), Err(HarnessError::Parse { line: 1, .. })));
        assert!(ExperimentConfig::from_text("agent = negucb").is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        for bad in ["lambda_context = 0", "alpha = -1", "seeds = 3..3", "alpha =", "subsample = 0", "issue_sizes = random:1"] {
            let text = format!("task = multiissue\n{bad}\n");
            assert!(ExperimentConfig::from_text(&text).is_err(), "{bad}");
        }
    }

    #[test]
    fn separate_alpha_lists_cross() {
        let c = ExperimentConfig::from_text("task = trading\nalpha_context = 0, 1\nalpha_hidden = 0.5, 2, 3\ncontext_kernel = se:0.5, se:1\n")
            .unwrap();
        let cells = c.cells();
        assert_eq!(cells.len(), 12);
        assert_eq!((cells[1].alpha_context, cells[1].alpha_hidden), (0.0, 2.0));
    }

    #[test]
    fn display_round_trips() {
        let c = ExperimentConfig::from_text(
            "task = multiissue\nissue_sizes = random:3\nalpha_context = 0.25\nsubsample = 300\nhidden_kernel = se:2\ndomain_seed = 4\n",
        )
        .unwrap();
        assert_eq!(ExperimentConfig::from_text(&c.to_string()).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_text(&d.to_string()).unwrap(), d);
    }
}
