//! Declarative experiment runner: a JSON spec in, a CSV table plus plot data out.

pub mod plot;
pub mod reference;
pub mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::closed_form::{
    delta_q_its, delta_q_weighted, epsilon_lower_bound, its_fixed_point, ser_weight_bound, superior_weight_bound_w0,
    ItsAnchor, ItsParams,
};
use crate::error::{GvrError, Result};
use crate::game::{make_paper_matrix_3x3, make_random_its_matrix, JointAction, PayoffMatrix};
use crate::graph::{build_graph_with, epsilon_sweep, joint_q_table, GraphOptions, QProvider};
use crate::learners::occupancy::median;
use crate::learners::{
    gvr_train, stn_occupancy_experiment, BatchSource, Decomposition, EpsilonSchedule, GvrConfig, LrSchedule,
    TrainingRecord, Variant,
};
use crate::par::{try_map_range, Exec};

pub use plot::{emit_plot_data, render_svg, PlotData};
pub use table::{compare_tables, fmt_sig9, Cell, ResultTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VerifyClosedForm,
    TransitionGraph,
    EpsilonSweep,
    DeltaQVerification,
    StnOccupancy,
    GvrScales,
    BoundsTable,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::VerifyClosedForm,
        ExperimentKind::TransitionGraph,
        ExperimentKind::EpsilonSweep,
        ExperimentKind::DeltaQVerification,
        ExperimentKind::StnOccupancy,
        ExperimentKind::GvrScales,
        ExperimentKind::BoundsTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyClosedForm => "verify_closed_form",
            ExperimentKind::TransitionGraph => "transition_graph",
            ExperimentKind::EpsilonSweep => "epsilon_sweep",
            ExperimentKind::DeltaQVerification => "delta_q_verification",
            ExperimentKind::StnOccupancy => "stn_occupancy",
            ExperimentKind::GvrScales => "gvr_scales",
            ExperimentKind::BoundsTable => "bounds_table",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GvrError::Parameter(format!("unknown experiment kind '{s}'")))
    }

    /// Analytic kinds are deterministic without any seed.
    pub fn is_analytic(self) -> bool {
        matches!(self, ExperimentKind::TransitionGraph | ExperimentKind::EpsilonSweep | ExperimentKind::BoundsTable)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSource {
    /// `tab2`, `fig1` or `randits:<n>x<m>:<seed>`.
    Builtin { name: String },
    File { path: PathBuf },
    Inline { n: usize, m: usize, values: Vec<f64> },
    /// Random matrices with fixed optimum at all-zeros and greedy anchor at all-(m−1), one per seed.
    Generator { n: usize, m: usize, optimal: f64, greedy: f64, low: f64, high: f64, seeds: Vec<u64> },
}

pub const RANDITS_OPTIMAL: f64 = 7.8;
pub const RANDITS_GREEDY: f64 = 6.0;
pub const RANDITS_LOW: f64 = -20.0;
pub const RANDITS_HIGH: f64 = 6.0;

/// Resolves a builtin game name.
pub fn builtin_game(name: &str) -> Result<PayoffMatrix> {
    match name {
        // The second name has no separately transcribed table; it resolves to the same matrix.
        "tab2" | "fig1" => Ok(make_paper_matrix_3x3()),
        _ => {
            let bad = || GvrError::Parameter(format!("unknown builtin game '{name}' (tab2, fig1, randits:<n>x<m>:<seed>)"));
            let rest = name.strip_prefix("randits:").ok_or_else(bad)?;
            let (dims, seed) = rest.split_once(':').ok_or_else(bad)?;
            let (n, m) = dims.split_once('x').ok_or_else(bad)?;
            let (n, m, seed) = (
                n.parse().map_err(|_| bad())?,
                m.parse().map_err(|_| bad())?,
                seed.parse().map_err(|_| bad())?,
            );
            Ok(make_random_its_matrix(n, m, RANDITS_OPTIMAL, RANDITS_GREEDY, RANDITS_LOW, RANDITS_HIGH, seed)?.0)
        }
    }
}

/// CLI-style game argument: a builtin name or a path to a JSON payoff file.
pub fn parse_game_arg(arg: &str) -> Result<PayoffMatrix> {
    if arg.ends_with(".json") || Path::new(arg).is_file() {
        PayoffMatrix::from_json(&std::fs::read_to_string(arg)?)
    } else {
        builtin_game(arg)
    }
}

impl GameSource {
    pub fn resolve(&self) -> Result<Vec<(String, PayoffMatrix)>> {
        match self {
            GameSource::Builtin { name } => Ok(vec![(name.clone(), builtin_game(name)?)]),
            GameSource::File { path } => {
                let g = PayoffMatrix::from_json(&std::fs::read_to_string(path)?)?;
                Ok(vec![(path.display().to_string(), g)])
            }
            GameSource::Inline { n, m, values } => Ok(vec![("inline".into(), PayoffMatrix::new(*n, *m, values.clone())?)]),
            GameSource::Generator { n, m, .. } => self.generate(*n, *m),
        }
    }

    fn generate(&self, n: usize, m: usize) -> Result<Vec<(String, PayoffMatrix)>> {
        let GameSource::Generator { optimal, greedy, low, high, seeds, .. } = self else {
            return Err(GvrError::Parameter("game source is not a generator".into()));
        };
        seeds
            .iter()
            .map(|&s| Ok((s.to_string(), make_random_its_matrix(n, m, *optimal, *greedy, *low, *high, s)?.0)))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub epsilon: Vec<f64>,
    pub alpha: Vec<f64>,
    pub e_q: Vec<f64>,
    pub e_q0: Vec<f64>,
    pub seeds: Vec<u64>,
    pub trials: usize,
    /// (n, m) pairs.
    pub sizes: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub game: Option<GameSource>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub provider: Option<QProvider>,
    #[serde(default)]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub training: Option<GvrConfig>,
    /// Output directory; not part of the hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

/// Tabular LVD/MVD protocol for checking learned joint Q against the calculation.
pub fn closed_form_training() -> GvrConfig {
    GvrConfig {
        variant: Variant::Vdn,
        batch_source: BatchSource::OnPolicy,
        learning_rate: 0.1,
        lr_schedule: LrSchedule::Harmonic { tau: 20.0 },
        iterations: 500,
        episodes_per_iteration: 100,
        ..GvrConfig::default()
    }
}

/// ITS with the greedy action pinned, on-policy, step size decaying as 1/k.
pub fn delta_q_training() -> GvrConfig {
    GvrConfig {
        variant: Variant::Its,
        alpha: 0.1,
        batch_source: BatchSource::OnPolicy,
        learning_rate: 0.1,
        lr_schedule: LrSchedule::Harmonic { tau: 50.0 },
        iterations: 2000,
        ..GvrConfig::default()
    }
}

/// Replay-based settings for the occupancy runs.
pub fn occupancy_training() -> GvrConfig {
    GvrConfig {
        batch_size: 128,
        critic_lr: 0.5,
        lr_schedule: LrSchedule::Harmonic { tau: 50.0 },
        iterations: 1000,
        ..GvrConfig::default()
    }
}

/// Annealed exploration for the larger random games.
pub fn scales_training() -> GvrConfig {
    GvrConfig {
        iterations: 5000,
        epsilon: EpsilonSchedule::Linear { start: 1.0, end: 0.05, iterations: 2500 },
        ..occupancy_training()
    }
}

fn randits_generator(n: usize, m: usize, optimal: f64) -> GameSource {
    GameSource::Generator {
        n,
        m,
        optimal,
        greedy: RANDITS_GREEDY,
        low: RANDITS_LOW,
        high: RANDITS_HIGH,
        seeds: (0..5).collect(),
    }
}

fn tab2() -> Option<GameSource> {
    Some(GameSource::Builtin { name: "tab2".into() })
}

impl ExperimentSpec {
    /// Fully populated spec reproducing the standard protocol of each kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut s = ExperimentSpec {
            kind,
            game: None,
            grid: Grid::default(),
            provider: None,
            variants: Vec::new(),
            training: None,
            out: None,
        };
        match kind {
            ExperimentKind::VerifyClosedForm => {
                s.game = tab2();
                s.grid.epsilon = vec![0.2];
                s.grid.seeds = (0..5).collect();
                s.provider = Some(QProvider::ClosedForm);
                s.training = Some(closed_form_training());
            }
            ExperimentKind::TransitionGraph => {
                s.game = tab2();
                s.grid.epsilon = vec![0.2];
                s.provider = Some(QProvider::ClosedForm);
            }
            ExperimentKind::EpsilonSweep => {
                s.game = tab2();
                s.grid.epsilon = (1..20).map(|k| k as f64 * 0.05).collect();
                s.provider = Some(QProvider::ClosedForm);
            }
            ExperimentKind::DeltaQVerification => {
                s.game = Some(randits_generator(4, 3, RANDITS_OPTIMAL));
                s.grid.epsilon = vec![0.2];
                s.grid.alpha = vec![0.1];
                s.grid.e_q = vec![0.3];
                s.grid.e_q0 = vec![0.1];
                s.grid.seeds = (0..5).collect();
                s.training = Some(delta_q_training());
            }
            ExperimentKind::StnOccupancy => {
                s.game = Some(randits_generator(4, 3, RANDITS_OPTIMAL));
                s.grid.epsilon = (1..10).map(|k| k as f64 / 10.0).collect();
                s.grid.seeds = vec![0];
                s.grid.trials = 100;
                s.variants = vec![Variant::Vdn, Variant::Its, Variant::Gvr];
                s.training = Some(occupancy_training());
            }
            ExperimentKind::GvrScales => {
                s.game = Some(randits_generator(2, 3, 8.0));
                s.grid.sizes = vec![[2, 3], [3, 6], [4, 12]];
                s.grid.seeds = (0..5).collect();
                s.training = Some(scales_training());
            }
            ExperimentKind::BoundsTable => {
                s.grid.sizes = vec![[2, 3], [2, 5], [2, 10], [3, 3], [4, 3]];
                s.grid.epsilon = vec![0.2];
                s.grid.alpha = vec![0.1];
                s.grid.e_q = vec![1.0 / 3.0];
            }
        }
        s
    }

    /// Parses a JSON spec, filling every field it leaves out from the preset of its kind.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        let kind = user
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| GvrError::Schema { path: "kind".into(), msg: "missing experiment kind".into() })?;
        let kind = ExperimentKind::parse(kind).map_err(|e| GvrError::Schema { path: "kind".into(), msg: e.to_string() })?;
        let mut base = serde_json::to_value(ExperimentSpec::preset(kind))?;
        merge(&mut base, user);
        let spec: ExperimentSpec = serde_path_to_error::deserialize(base).map_err(|e| GvrError::Schema {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |path: &str, msg: &str| Err(GvrError::Schema { path: path.into(), msg: msg.into() });
        use ExperimentKind as K;
        let need_game = !matches!(self.kind, K::BoundsTable);
        if need_game && self.game.is_none() {
            return schema("game", "a game source is required");
        }
        let g = &self.grid;
        let mut required: Vec<(&str, bool)> = vec![];
        match self.kind {
            K::VerifyClosedForm => required.extend([("grid.epsilon", g.epsilon.is_empty()), ("grid.seeds", g.seeds.is_empty())]),
            K::TransitionGraph | K::EpsilonSweep => required.push(("grid.epsilon", g.epsilon.is_empty())),
            K::DeltaQVerification => required.extend([
                ("grid.epsilon", g.epsilon.is_empty()),
                ("grid.alpha", g.alpha.is_empty()),
                ("grid.e_q", g.e_q.is_empty()),
                ("grid.e_q0", g.e_q0.is_empty()),
                ("grid.seeds", g.seeds.is_empty()),
            ]),
            K::StnOccupancy => required.extend([
                ("grid.epsilon", g.epsilon.is_empty()),
                ("grid.seeds", g.seeds.is_empty()),
                ("grid.trials", g.trials == 0),
                ("variants", self.variants.is_empty()),
            ]),
            K::GvrScales => required.extend([("grid.sizes", g.sizes.is_empty()), ("grid.seeds", g.seeds.is_empty())]),
            K::BoundsTable => required.extend([
                ("grid.sizes", g.sizes.is_empty()),
                ("grid.epsilon", g.epsilon.is_empty()),
                ("grid.alpha", g.alpha.is_empty()),
                ("grid.e_q", g.e_q.is_empty()),
            ]),
        }
        if let Some((path, _)) = required.into_iter().find(|r| r.1) {
            return schema(path, "must not be empty");
        }
        for (k, e) in g.epsilon.iter().enumerate() {
            if !(0.0..=1.0).contains(e) {
                return schema(&format!("grid.epsilon[{k}]"), "epsilon must lie in [0, 1]");
            }
        }
        for (k, [n, m]) in g.sizes.iter().enumerate() {
            if *n < 2 || *m < 2 {
                return schema(&format!("grid.sizes[{k}]"), "need n >= 2 and m >= 2");
            }
        }
        if matches!(self.kind, K::GvrScales) && !matches!(self.game, Some(GameSource::Generator { .. })) {
            return schema("game", "gvr_scales needs a generator game source");
        }
        if matches!(self.kind, K::VerifyClosedForm | K::DeltaQVerification | K::StnOccupancy | K::GvrScales)
            && self.training.is_none()
        {
            return schema("training", "a training config is required");
        }
        Ok(())
    }
}

/// Recursive object merge; a user object naming a different `kind` replaces the preset one.
fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            let replace = u.get("kind").is_some_and(|k| b.get("kind") != Some(k));
            if replace {
                *b = u;
                return;
            }
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, u) => *b = u,
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub spec: ExperimentSpec,
    pub table: ResultTable,
    pub plot: PlotData,
    /// Extra files (DOT/JSON graphs) as (file name, contents).
    pub attachments: Vec<(String, String)>,
}

pub fn run(spec: &ExperimentSpec, exec: Exec) -> Result<RunOutput> {
    spec.validate()?;
    let start = Instant::now();
    let mut attachments = Vec::new();
    let mut table = match spec.kind {
        ExperimentKind::VerifyClosedForm => run_verify_closed_form(spec, exec)?,
        ExperimentKind::TransitionGraph => run_transition_graph(spec, exec, &mut attachments)?,
        ExperimentKind::EpsilonSweep => run_epsilon_sweep(spec)?,
        ExperimentKind::DeltaQVerification => run_delta_q(spec, exec)?,
        ExperimentKind::StnOccupancy => run_occupancy(spec, exec)?,
        ExperimentKind::GvrScales => run_scales(spec, exec)?,
        ExperimentKind::BoundsTable => run_bounds(spec)?,
    };
    table.spec_hash = spec.hash();
    table.meta.wall_clock_seconds = start.elapsed().as_secs_f64();
    table.meta.seeds = spec.grid.seeds.clone();
    let plot = emit_plot_data(&table, spec.kind.name())?;
    Ok(RunOutput { spec: spec.clone(), table, plot, attachments })
}

/// Writes `<kind>.csv`, `<kind>.meta.json`, `<kind>.plot.json`, `<kind>.svg` and attachments.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = &out.table.name;
    let meta = serde_json::json!({
        "spec_hash": out.table.spec_hash,
        "artifact_version": out.table.meta.artifact_version,
        "wall_clock_seconds": out.table.meta.wall_clock_seconds,
        "seeds": out.table.meta.seeds,
        "notes": out.table.meta.notes,
        "spec": out.spec,
    });
    let mut files = vec![
        (format!("{name}.csv"), out.table.to_csv()),
        (format!("{name}.meta.json"), serde_json::to_string_pretty(&meta)? + "\n"),
        (format!("{name}.plot.json"), serde_json::to_string_pretty(&out.plot)? + "\n"),
        (format!("{name}.svg"), render_svg(&out.plot)),
    ];
    files.extend(out.attachments.iter().cloned());
    let mut written = Vec::with_capacity(files.len());
    for (f, body) in files {
        let p = dir.join(f);
        std::fs::write(&p, body)?;
        written.push(p);
    }
    Ok(written)
}

fn games(spec: &ExperimentSpec) -> Result<Vec<(String, PayoffMatrix)>> {
    spec.game.as_ref().expect("validated").resolve()
}

fn training(spec: &ExperimentSpec) -> GvrConfig {
    spec.training.clone().expect("validated")
}

fn provider_for(spec: &ExperimentSpec, game: &PayoffMatrix) -> QProvider {
    match spec.provider {
        Some(QProvider::ClosedForm) if game.n != 2 => QProvider::FixedPoint,
        Some(p) => p,
        None if game.n == 2 => QProvider::ClosedForm,
        None => QProvider::FixedPoint,
    }
}

fn run_verify_closed_form(spec: &ExperimentSpec, exec: Exec) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &["game", "epsilon", "stn", "action", "calc_q", "lvd_q", "mvd_q", "abs_err"],
    );
    let base = training(spec);
    let seeds = &spec.grid.seeds;
    for (label, game) in games(spec)? {
        let shape = game.shape();
        let provider = provider_for(spec, &game);
        for &eps in &spec.grid.epsilon {
            let graph = build_graph_with(&game, eps, provider, &GraphOptions { exec, ..GraphOptions::default() })?;
            let stns = graph.stns();
            // One job per (STN, decomposition, seed); each STN gets its own stream.
            let per = 2 * seeds.len();
            let learned = try_map_range(exec, stns.len() * per, |k| {
                let (s, rest) = (k / per, k % per);
                let decomposition = if rest < seeds.len() { Decomposition::Lvd } else { Decomposition::Mvd };
                let seed = seeds[rest % seeds.len()];
                let cfg = GvrConfig {
                    decomposition,
                    epsilon: EpsilonSchedule::Constant { epsilon: eps },
                    init_greedy: Some(shape.unindex(stns[s])),
                    ..base.clone()
                };
                Ok::<_, GvrError>(gvr_train(&game, &cfg, seed, stns[s] as u64)?.utilities.joint_table())
            })?;
            for (s, &node) in stns.iter().enumerate() {
                let calc = joint_q_table(&game, &shape.unindex(node), eps, provider)?;
                let mean = |range: std::ops::Range<usize>| -> Vec<f64> {
                    let mut acc = vec![0.0; game.size()];
                    for j in range.clone() {
                        for (a, v) in acc.iter_mut().zip(&learned[s * per + j]) {
                            *a += v;
                        }
                    }
                    acc.iter().map(|a| a / range.len() as f64).collect()
                };
                let lvd = mean(0..seeds.len());
                let mvd = mean(seeds.len()..per);
                for i in 0..game.size() {
                    let err = (lvd[i] - calc[i]).abs().max((mvd[i] - calc[i]).abs());
                    t.push(vec![
                        label.as_str().into(),
                        eps.into(),
                        shape.unindex(node).to_string().into(),
                        shape.unindex(i).to_string().into(),
                        calc[i].into(),
                        lvd[i].into(),
                        mvd[i].into(),
                        err.into(),
                    ]);
                }
            }
        }
    }
    t.meta.notes.push("learned columns are per-cell means over grid.seeds; trial stream = STN index".into());
    Ok(t)
}

fn run_transition_graph(spec: &ExperimentSpec, exec: Exec, files: &mut Vec<(String, String)>) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &["game", "epsilon", "node", "action", "true_q", "successor", "is_stn", "optimal"],
    );
    for (label, game) in games(spec)? {
        let provider = provider_for(spec, &game);
        for &eps in &spec.grid.epsilon {
            let g = build_graph_with(&game, eps, provider, &GraphOptions { exec, ..GraphOptions::default() })?;
            for (p, &i) in g.nodes.iter().enumerate() {
                t.push(vec![
                    label.as_str().into(),
                    eps.into(),
                    i.into(),
                    g.action(i).to_string().into(),
                    game.values[i].into(),
                    g.action(g.successor[p]).to_string().into(),
                    g.stn[p].into(),
                    (i == g.optimal).into(),
                ]);
            }
            let stem = format!("transition_graph_{}_eps{}", sanitize(&label), fmt_sig9(eps));
            files.push((format!("{stem}.dot"), g.to_dot()));
            files.push((format!("{stem}.json"), g.to_json() + "\n"));
        }
    }
    Ok(t)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn run_epsilon_sweep(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &["game", "row", "epsilon", "stn_count", "optimal_is_stn", "oscillations", "stns"],
    );
    for (label, game) in games(spec)? {
        let sw = epsilon_sweep(&game, &spec.grid.epsilon, provider_for(spec, &game))?;
        for r in &sw.rows {
            let stns: Vec<String> = r.stns.iter().map(JointAction::to_string).collect();
            t.push(vec![
                label.as_str().into(),
                "grid".into(),
                r.epsilon.into(),
                r.stns.len().into(),
                r.optimal_is_stn.into(),
                r.oscillations.into(),
                stns.join(" ").into(),
            ]);
        }
        if let Some(th) = sw.threshold {
            t.push(vec![label.as_str().into(), "threshold".into(), th.into(), 1usize.into(), "".into(), "".into(), "".into()]);
        }
    }
    Ok(t)
}

fn run_delta_q(spec: &ExperimentSpec, exec: Exec) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &["epsilon", "alpha", "e_q", "e_q0", "source", "matrix", "seed", "delta_q"],
    );
    let base = training(spec);
    let games = games(spec)?;
    let g = &spec.grid;
    let seeds = &g.seeds;
    for &eps in &g.epsilon {
        for &alpha in &g.alpha {
            for &e_q in &g.e_q {
                for &e_q0 in &g.e_q0 {
                    let key = |source: &str, matrix: &str, seed: &str, v: f64| -> Vec<Cell> {
                        vec![eps.into(), alpha.into(), e_q.into(), e_q0.into(), source.into(), matrix.into(), seed.into(), v.into()]
                    };
                    let (n, m) = (games[0].1.n, games[0].1.m);
                    let greedy = JointAction::uniform(n, m - 1);
                    let q_true = games[0].1.get(&greedy);
                    let its = ItsParams { alpha, e_q0, e_q };
                    t.push(key("formula_true_greedy", "", "", delta_q_its(n, m, eps, &its, q_true, q_true)?));
                    for (label, game) in &games {
                        let sol = its_fixed_point(game, &greedy, eps, alpha, e_q0, ItsAnchor::SelfConsistent)?;
                        let opt = game.optimal_action();
                        let dq = sol.utilities.joint_q(&opt.0) - sol.utilities.joint_q(&greedy.0);
                        t.push(key("fixed_point_self_consistent", label, "", dq));
                    }
                    // Same training stream for every matrix, so matrices differ only in inferior entries.
                    let mc = try_map_range(exec, games.len() * seeds.len(), |k| {
                        let (gi, si) = (k / seeds.len(), k % seeds.len());
                        let game = &games[gi].1;
                        let cfg = GvrConfig {
                            alpha,
                            epsilon: EpsilonSchedule::Constant { epsilon: eps },
                            fixed_greedy: Some(greedy.clone()),
                            ..base.clone()
                        };
                        let r = gvr_train(game, &cfg, seeds[si], 0)?;
                        let opt = game.optimal_action();
                        Ok::<_, GvrError>(r.utilities.joint_q(&opt.0) - r.utilities.joint_q(&greedy.0))
                    })?;
                    for (k, dq) in mc.into_iter().enumerate() {
                        let (gi, si) = (k / seeds.len(), k % seeds.len());
                        t.push(key("monte_carlo", &games[gi].0, &seeds[si].to_string(), dq));
                    }
                }
            }
        }
    }
    Ok(t)
}

fn run_occupancy(spec: &ExperimentSpec, exec: Exec) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &[
            "variant", "epsilon", "matrix", "trials", "optimal", "non_optimal", "flapping", "r_stn_opt", "r_stn_non_opt",
        ],
    );
    let base = training(spec);
    let labelled = games(spec)?;
    let (labels, games): (Vec<String>, Vec<PayoffMatrix>) = labelled.into_iter().unzip();
    let seed = spec.grid.seeds[0];
    for &v in &spec.variants {
        let cfg = GvrConfig { variant: v, ..base.clone() };
        let tab = stn_occupancy_experiment(&games, &spec.grid.epsilon, spec.grid.trials, &cfg, seed, exec)?;
        for r in &tab.rows {
            t.push(vec![
                v.label().into(),
                r.epsilon.into(),
                labels[r.matrix].as_str().into(),
                r.trials.into(),
                r.optimal.into(),
                r.non_optimal.into(),
                r.flapping.into(),
                r.ratio_optimal().into(),
                r.ratio_non_optimal().into(),
            ]);
        }
        for eps in tab.epsilons() {
            t.push(vec![
                v.label().into(),
                eps.into(),
                "median".into(),
                spec.grid.trials.into(),
                "".into(),
                "".into(),
                "".into(),
                tab.median_optimal(eps).into(),
                tab.median_non_optimal(eps).into(),
            ]);
        }
    }
    t.meta.notes.push(format!(
        "trial k of each variant runs under seed {seed} with ChaCha stream k = (matrix * |epsilon| + epsilon index) * trials + trial"
    ));
    Ok(t)
}

fn run_scales(spec: &ExperimentSpec, exec: Exec) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &["n", "m", "size", "seed", "final_test_return", "reached_optimal", "non_converged", "target"],
    );
    let base = training(spec);
    let src = spec.game.as_ref().expect("validated");
    let GameSource::Generator { optimal, .. } = src else { unreachable!("validated") };
    let seeds = &spec.grid.seeds;
    for (si, &[n, m]) in spec.grid.sizes.iter().enumerate() {
        let games = src.generate(n, m)?;
        let size = m.pow(n as u32);
        let recs: Vec<TrainingRecord> = try_map_range(exec, games.len() * seeds.len(), |k| {
            let (gi, s) = (k / seeds.len(), k % seeds.len());
            gvr_train(&games[gi].1, &base, seeds[s], si as u64)
        })?;
        let mut returns = Vec::new();
        for (k, r) in recs.iter().enumerate() {
            let label = format!("{}/{}", games[k / seeds.len()].0, seeds[k % seeds.len()]);
            returns.push(r.final_test_return);
            t.push(vec![
                n.into(),
                m.into(),
                size.into(),
                label.into(),
                r.final_test_return.into(),
                r.reached_optimal.into(),
                r.non_converged.into(),
                (*optimal).into(),
            ]);
        }
        t.push(vec![
            n.into(),
            m.into(),
            size.into(),
            "median".into(),
            median(&mut returns).into(),
            "".into(),
            "".into(),
            (*optimal).into(),
        ]);
    }
    t.meta.notes.push("seed column is <matrix seed>/<training seed>".into());
    Ok(t)
}

fn run_bounds(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        spec.kind.name(),
        &["n", "m", "size", "epsilon", "alpha", "e_q", "w0", "delta_q_at_w0", "w_ser_bound", "epsilon0", "eta0"],
    );
    let g = &spec.grid;
    for &[n, m] in &g.sizes {
        for &eps in &g.epsilon {
            for &alpha in &g.alpha {
                for &e_q in &g.e_q {
                    let w0 = superior_weight_bound_w0(n, m, eps, alpha, e_q)?;
                    // With Q(ú) equal to the true greedy value the weighted gap closes exactly at w0.
                    let q = 6.0;
                    let dq = if w0 >= 1.0 { delta_q_weighted(n, m, eps, alpha, e_q, w0, q, q)? } else { f64::NAN };
                    let ws = ser_weight_bound(n, m, eps, alpha, e_q, 1.0)?;
                    let b = epsilon_lower_bound(m, n, e_q, alpha)?;
                    t.push(vec![
                        n.into(),
                        m.into(),
                        m.pow(n as u32).into(),
                        eps.into(),
                        alpha.into(),
                        e_q.into(),
                        w0.into(),
                        dq.into(),
                        ws.into(),
                        b.epsilon0.into(),
                        b.eta0.into(),
                    ]);
                }
            }
        }
    }
    Ok(t)
}

/// Per-iteration training record as a table.
pub fn training_table(record: &TrainingRecord, game: &PayoffMatrix) -> ResultTable {
    let mut t = ResultTable::new("train", &["iteration", "greedy_action", "test_return", "q_table_checksum"]);
    let shape = game.shape();
    for r in &record.records {
        t.push(vec![
            r.iteration.into(),
            shape.unindex(r.greedy).to_string().into(),
            r.test_return.map(Cell::Num).unwrap_or(Cell::Text(String::new())),
            r.q_checksum.into(),
        ]);
    }
    t
}
