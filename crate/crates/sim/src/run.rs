use std::path::{Path, PathBuf};

use cqi_core::chain::{chain_rule_distributions, entropy_sequence, run_chain, ChainSpec};
use cqi_core::epr::{epr_report, EprConfig};
use cqi_core::postulates::{
    born_probability, cqi_probability, rr_probability, shrinking_sequence, two_point, DetectorExperiment,
};
use cqi_core::random::{random_amplitudes, random_unitary};
use cqi_core::realism::realism_scenario;
use cqi_core::zeno::{time_reversed_zeno, zeno_pair, ZenoConfig};
use cqi_core::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{
    ChainParams, DetectorParams, EprParams, ExperimentConfig, Kind, RealismParams, TimeReversedParams, TwoPointParams,
    ZenoParams,
};
use crate::error::SimError;
use crate::output::{self, Artifact, Cell, Table};

/// Largest accepted `--refine`.
pub const MAX_REFINE: u32 = 4;

/// Slack on the monotone checks of the Zeno sweep.
const ROUND_OFF: f64 = 1e-12;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Runs one experiment in memory.
pub fn execute(cfg: &ExperimentConfig, refine: u32) -> Result<Artifact, SimError> {
    cfg.validate()?;
    if refine > 0 && !cfg.kind.uses_grid() {
        return Err(SimError::Config(format!("--refine: kind `{}` has no grid to refine", cfg.kind.name())));
    }
    if refine > MAX_REFINE {
        return Err(SimError::Config(format!("--refine: {refine} exceeds {MAX_REFINE}")));
    }
    match cfg.kind {
        Kind::Chain => chain(cfg),
        Kind::DetectorCompare => detector_compare(cfg, refine),
        Kind::TwoPoint => two_point_run(cfg, refine),
        Kind::Zeno => zeno(cfg),
        Kind::TimeReversedZeno => time_reversed(cfg),
        Kind::Epr => epr(cfg),
        Kind::RealismScenario => realism(cfg),
    }
}

/// Runs one experiment and writes its output file.
pub fn run(cfg: &ExperimentConfig, refine: u32, out_dir: Option<&Path>) -> Result<PathBuf, SimError> {
    let art = execute(cfg, refine)?;
    let text = output::render(cfg, &art, refine, &output::now_rfc3339())?;
    let path = output::destination(cfg, out_dir);
    output::write(&path, &text)?;
    Ok(path)
}

pub fn run_file(config: &Path, refine: u32, out_dir: Option<&Path>) -> Result<PathBuf, SimError> {
    run(&ExperimentConfig::load(config)?, refine, out_dir)
}

fn matrix(stage: usize, rows: &[Vec<crate::config::Complex>]) -> Result<DMatrix<C64>, SimError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(SimError::Config(format!("params.overlaps[{stage}]: rows must all have length {n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j].value()))
}

fn random_specs(seed: u64, count: usize, max_dim: usize, max_observers: usize) -> Result<Vec<ChainSpec>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let d = rng.random_range(2..=max_dim);
            let n = rng.random_range(1..=max_observers);
            let initial = random_amplitudes(&mut rng, d);
            let overlaps = (1..n).map(|_| random_unitary(&mut rng, d)).collect();
            Ok(ChainSpec::new(initial, overlaps)?)
        })
        .collect()
}

fn chain(cfg: &ExperimentConfig) -> Result<Artifact, SimError> {
    let p: ChainParams = cfg.params()?;
    let specs = match (&p.initial, &p.random) {
        (Some(initial), _) => {
            let overlaps =
                p.overlaps.iter().flatten().enumerate().map(|(k, m)| matrix(k, m)).collect::<Result<Vec<_>, _>>()?;
            vec![ChainSpec::new(initial.iter().map(|c| c.value()).collect(), overlaps)?]
        }
        (None, Some(r)) => random_specs(cfg.seed, r.count, r.max_dim, r.max_observers)?,
        (None, None) => unreachable!("validated"),
    };
    let rows = specs
        .par_iter()
        .map(|spec| {
            let res = run_chain(spec)?;
            let rule = chain_rule_distributions(spec)?;
            let gap = rule.iter().zip(&res.distributions).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
            Ok((spec.dim(), spec.observers(), entropy_sequence(&res), gap))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut t = Table::new(&[
        "index",
        "dim",
        "observers",
        "entropies",
        "system_entropy",
        "worst_decrease",
        "monotone",
        "system_matches_last",
        "chain_rule_gap",
    ]);
    for (i, (d, n, arrow, gap)) in rows.iter().enumerate() {
        let s: Vec<String> = arrow.entropies.iter().map(|v| format!("{v:e}")).collect();
        t.push(vec![
            i.into(),
            (*d).into(),
            (*n).into(),
            s.join(";").into(),
            arrow.system_entropy.into(),
            arrow.worst_decrease.into(),
            arrow.monotone.into(),
            arrow.system_matches_last.into(),
            (*gap).into(),
        ]);
    }
    let diagnostics = json!({
        "chains": rows.len(),
        "all_monotone": rows.iter().all(|r| r.2.monotone),
        "all_system_matches_last": rows.iter().all(|r| r.2.system_matches_last),
        "worst_decrease": rows.iter().map(|r| r.2.worst_decrease).fold(f64::NEG_INFINITY, f64::max),
        "max_chain_rule_gap": rows.iter().map(|r| r.3).fold(0.0, f64::max),
    });
    Ok(Artifact { table: t, diagnostics, resolved: to_value(&p) })
}

/// Benchmark experiment with the config's overrides applied.
pub fn detector_experiment(p: &DetectorParams, grid: Option<cqi_core::contspace::Grid>) -> DetectorExperiment {
    let mut e = DetectorExperiment::benchmark();
    if let Some(g) = grid {
        e.grid = g;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = &p.$f { e.$f = v.clone(); } )* };
    }
    set!(kernel, psi0, t0, region_r, r_dt, coupling_alpha, potential_v, readout, pert_tol, xcheck_tol, offdiag_tol);
    e
}

fn convergence(values: &[f64], k: usize) -> Cell {
    if k == 0 {
        Cell::Empty
    } else {
        ((values[k] - values[k - 1]).abs() / values[k].abs()).into()
    }
}

fn detector_compare(cfg: &ExperimentConfig, refine: u32) -> Result<Artifact, SimError> {
    let p: DetectorParams = cfg.params()?;
    let base = detector_experiment(&p, cfg.grid);
    base.validate()?;
    let levels = (0..=refine)
        .map(|k| {
            let e = base.refined(k)?;
            let born = born_probability(&e)?;
            if !born.consistent {
                return Err(SimError::Numerical(format!(
                    "level {k}: late-slice cross-check gap {:e} exceeds xcheck_tol {:e}",
                    born.relative_gap, e.xcheck_tol
                )));
            }
            let p_rr = rr_probability(&e)?;
            let cqi = cqi_probability(&e)?;
            Ok((e, born, p_rr, cqi))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut cols = vec![
        "level",
        "nx",
        "dx",
        "r_dt",
        "p_born",
        "late_slice",
        "xcheck_gap",
        "p_rr",
        "rr_born_ratio",
        "p_cqi",
        "cqi_born_rel",
        "offdiag",
        "schmidt_rank",
    ];
    if refine > 0 {
        cols.push("convergence");
    }
    let mut t = Table::new(&cols);
    let borns: Vec<f64> = levels.iter().map(|l| l.1.p_born).collect();
    let rels: Vec<f64> = levels.iter().map(|l| l.3.p_cqi / l.1.p_born - 1.0).collect();
    for (k, (e, born, p_rr, cqi)) in levels.iter().enumerate() {
        let mut row: Vec<Cell> = vec![
            k.into(),
            e.grid.nx.into(),
            e.grid.dx().into(),
            e.r_dt.into(),
            born.p_born.into(),
            born.late_slice.into(),
            born.relative_gap.into(),
            (*p_rr).into(),
            (p_rr / born.p_born).into(),
            cqi.p_cqi.into(),
            rels[k].into(),
            cqi.offdiag.into(),
            cqi.schmidt_rank.into(),
        ];
        if refine > 0 {
            row.push(convergence(&borns, k));
        }
        t.push(row);
    }
    let abs: Vec<f64> = rels.iter().map(|r| r.abs()).collect();
    let mut diagnostics = json!({
        "perturbativity": base.perturbativity(),
        "snapped_region": levels[0].1.snapped_region,
        "cqi_born_rel": rels,
        "cqi_born_rel_decreasing": abs.windows(2).all(|w| w[1] <= w[0]),
        "max_abs_cqi_born_rel": abs.iter().copied().fold(0.0, f64::max),
    });
    if let Some(sides) = &p.shrink_sides {
        let c = p.shrink_center.unwrap_or([-2.5, 4.0]);
        let steps = shrinking_sequence(&base, (c[0], c[1]), sides)?;
        let r: Vec<f64> = steps.iter().map(|s| s.normalized_ratio).collect();
        let d: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        diagnostics["shrink"] = json!({
            "steps": steps,
            "differences": d,
            "converging": d.windows(2).all(|w| w[1] < w[0]),
        });
    }
    if let Some(shifts) = &p.readout_shifts {
        let p0 = levels[0].3.p_cqi;
        let sweep = shifts
            .iter()
            .map(|&s| {
                let q = cqi_probability(&base.with_readout(base.readout.shifted(s)))?.p_cqi;
                Ok(json!({ "shift": s, "p_cqi": q, "relative_change": q / p0 - 1.0 }))
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        diagnostics["readout_shifts"] = Value::Array(sweep);
    }
    let mut resolved = to_value(&base);
    for key in ["shrink_sides", "shrink_center", "readout_shifts"] {
        resolved[key] = p.params_value(key);
    }
    Ok(Artifact { table: t, diagnostics, resolved })
}

impl DetectorParams {
    fn params_value(&self, key: &str) -> Value {
        match key {
            "shrink_sides" => to_value(&self.shrink_sides),
            "shrink_center" => to_value(&self.shrink_center),
            _ => to_value(&self.readout_shifts),
        }
    }
}

fn two_point_run(cfg: &ExperimentConfig, refine: u32) -> Result<Artifact, SimError> {
    let p: TwoPointParams = cfg.params()?;
    let overrides = DetectorParams {
        kernel: p.kernel,
        psi0: p.psi0.clone(),
        coupling_alpha: p.coupling_alpha,
        potential_v: p.potential_v,
        ..Default::default()
    };
    let base = detector_experiment(&overrides, cfg.grid);
    let reports = (0..=refine)
        .map(|k| {
            let mut e = base.refined(k)?;
            let side = p.side.unwrap_or(2.0 * e.grid.dx());
            e.r_dt = side / 16.0;
            Ok((e.grid.nx, two_point(&e, (p.a[0], p.a[1]), (p.b[0], p.b[1]), side)?))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut cols = vec![
        "level",
        "nx",
        "side",
        "mean_a_re",
        "mean_a_im",
        "mean_b_re",
        "mean_b_im",
        "p_rr",
        "p_born",
        "kappa",
        "kernel_overlap",
        "measured_cross",
        "predicted_cross",
        "cross_relative_error",
        "ratio",
        "p_cqi",
        "cqi_born_rel",
    ];
    if refine > 0 {
        cols.push("convergence");
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.1.ratio).collect();
    let mut t = Table::new(&cols);
    for (k, (nx, r)) in reports.iter().enumerate() {
        let mut row: Vec<Cell> = vec![
            k.into(),
            (*nx).into(),
            r.side.into(),
            r.mean_a.0.into(),
            r.mean_a.1.into(),
            r.mean_b.0.into(),
            r.mean_b.1.into(),
            r.p_rr.into(),
            r.p_born.into(),
            r.kappa.into(),
            r.kernel_overlap.into(),
            r.measured_cross.into(),
            r.predicted_cross.into(),
            r.cross_relative_error.into(),
            r.ratio.into(),
            r.p_cqi.into(),
            (r.p_cqi / r.p_born - 1.0).into(),
        ];
        if refine > 0 {
            row.push(convergence(&ratios, k));
        }
        t.push(row);
    }
    let last = &reports[reports.len() - 1].1;
    let diagnostics = json!({
        "report": last,
        "max_cross_relative_error": reports.iter().map(|r| r.1.cross_relative_error).fold(0.0, f64::max),
    });
    let mut resolved = to_value(&p);
    resolved["side"] = to_value(&reports[0].1.side);
    resolved["experiment"] = to_value(&base);
    Ok(Artifact { table: t, diagnostics, resolved })
}

/// `sin²(2ωε)` and `2cos²(ωε)sin²(ωε)`.
pub fn zeno_closed_form(omega_epsilon: f64) -> (f64, f64) {
    let (s, c) = omega_epsilon.sin_cos();
    ((2.0 * omega_epsilon).sin().powi(2), 2.0 * c * c * s * s)
}

fn zeno(cfg: &ExperimentConfig) -> Result<Artifact, SimError> {
    let p: ZenoParams = cfg.params()?;
    let eps0 = p.epsilon();
    let mut t = Table::new(&[
        "step",
        "epsilon",
        "omega_epsilon",
        "p_without",
        "p_with",
        "closed_without",
        "closed_with",
        "err_without",
        "err_with",
        "ratio",
        "ratio_minus_half",
    ]);
    let mut gaps = Vec::new();
    let mut max_err: f64 = 0.0;
    let mut in_band = true;
    for n in 0..=p.halvings {
        let eps = eps0 / 2f64.powi(n as i32);
        let (without, with) = zeno_pair(&ZenoConfig::new(p.omega, eps))?;
        let we = p.omega * eps;
        let (cw, cz) = zeno_closed_form(we);
        let ratio = with / without;
        let (ew, ez) = ((without - cw).abs(), (with - cz).abs());
        max_err = max_err.max(ew).max(ez);
        in_band &= (0.5 - ROUND_OFF..=0.5125).contains(&ratio);
        gaps.push((ratio - 0.5).abs());
        t.push(vec![
            n.into(),
            eps.into(),
            we.into(),
            without.into(),
            with.into(),
            cw.into(),
            cz.into(),
            ew.into(),
            ez.into(),
            ratio.into(),
            (ratio - 0.5).into(),
        ]);
    }
    let diagnostics = json!({
        "max_closed_form_error": max_err,
        "ratio_in_band": in_band,
        "ratio_gap_nonincreasing": gaps.windows(2).all(|w| w[1] <= w[0] + ROUND_OFF),
        "beyond_leading_order": ZenoConfig::new(p.omega, eps0).beyond_leading_order(),
    });
    let resolved = json!({ "omega": p.omega, "epsilon": eps0, "halvings": p.halvings });
    Ok(Artifact { table: t, diagnostics, resolved })
}

fn time_reversed(cfg: &ExperimentConfig) -> Result<Artifact, SimError> {
    let p: TimeReversedParams = cfg.params()?;
    let thetas = p.thetas();
    let reports = thetas
        .par_iter()
        .map(|&theta| Ok(time_reversed_zeno(&ZenoConfig { theta, ..ZenoConfig::new(p.omega, p.epsilon) })?))
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut t = Table::new(&[
        "theta",
        "shift",
        "expected",
        "error",
        "shift_sample_1",
        "shift_sample_2",
        "residual_entanglement",
    ]);
    let mut max_err: f64 = 0.0;
    for (&theta, r) in thetas.iter().zip(&reports) {
        let expected = theta / p.omega;
        let err = (r.shift - expected).abs();
        max_err = max_err.max(err);
        t.push(vec![
            theta.into(),
            r.shift.into(),
            expected.into(),
            err.into(),
            r.shift_samples.0.into(),
            r.shift_samples.1.into(),
            r.residual_entanglement.into(),
        ]);
    }
    let diagnostics = json!({
        "max_shift_error": max_err,
        "max_residual_entanglement": reports.iter().map(|r| r.residual_entanglement).fold(0.0, f64::max),
    });
    let resolved = json!({ "omega": p.omega, "epsilon": p.epsilon, "thetas": thetas });
    Ok(Artifact { table: t, diagnostics, resolved })
}

fn epr(cfg: &ExperimentConfig) -> Result<Artifact, SimError> {
    let p: EprParams = cfg.params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unitaries: Vec<DMatrix<C64>> = (0..p.n_unitaries).map(|_| random_unitary(&mut rng, 2)).collect();
    let base = EprConfig::new(p.alpha.value(), p.beta.value());
    let reports = unitaries
        .into_par_iter()
        .map(|u| Ok(epr_report(&EprConfig { alice_unitary: Some(u), ..base.clone() })?))
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut t = Table::new(&[
        "index",
        "s_a",
        "s_b",
        "s_ab",
        "s_a_given_b",
        "s_b_given_a",
        "mutual_information",
        "cross_outcome",
        "global_entropy",
        "order_difference",
        "no_communication",
    ]);
    for (i, r) in reports.iter().enumerate() {
        t.push(vec![
            i.into(),
            r.s_a.into(),
            r.s_b.into(),
            r.s_ab.into(),
            r.s_a_given_b.into(),
            r.s_b_given_a.into(),
            r.mutual_information.into(),
            r.cross_outcome.into(),
            r.global_entropy.into(),
            r.order_difference.into(),
            r.no_communication.into(),
        ]);
    }
    let max = |f: fn(&cqi_core::epr::EprReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let diagnostics = json!({
        "unitaries": reports.len(),
        "max_abs_s_a_given_b": max(|r| r.s_a_given_b.abs()),
        "max_no_communication": max(|r| r.no_communication.unwrap_or(0.0)),
        "max_cross_outcome": max(|r| r.cross_outcome),
    });
    Ok(Artifact { table: t, diagnostics, resolved: to_value(&p) })
}

fn realism(cfg: &ExperimentConfig) -> Result<Artifact, SimError> {
    let p: RealismParams = cfg.params()?;
    let r = realism_scenario(p.alpha.value(), p.beta.value())?;
    if !(r.alice_ready_pure && r.bob_mixture_matches && r.correlated) {
        return Err(SimError::Internal(format!(
            "realism scenario: alice_ready_pure = {}, bob_mixture_matches = {}, correlated = {}",
            r.alice_ready_pure, r.bob_mixture_matches, r.correlated
        )));
    }
    let mut t = Table::new(&[
        "slice",
        "s_a",
        "s_b",
        "s_ab",
        "s_a_given_b",
        "purity_a",
        "rho_a_00",
        "rho_a_11",
        "rho_b_00",
        "rho_b_11",
    ]);
    for s in &r.slices {
        t.push(vec![
            s.label.clone().into(),
            s.s_a.into(),
            s.s_b.into(),
            s.s_ab.into(),
            s.s_a_given_b.into(),
            s.purity_a.into(),
            s.rho_a[0][0].0.into(),
            s.rho_a[1][1].0.into(),
            s.rho_b[0][0].0.into(),
            s.rho_b[1][1].0.into(),
        ]);
    }
    let diagnostics = json!({
        "alice_ready_pure": r.alice_ready_pure,
        "bob_mixture_matches": r.bob_mixture_matches,
        "correlated": r.correlated,
        "global_norm_defect": r.global_norm_defect,
        "slices": r.slices,
    });
    Ok(Artifact { table: t, diagnostics, resolved: to_value(&p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn zeno_rows_match_closed_form() {
        let a = execute(&cfg(r#"{"kind":"zeno","params":{"omega":2,"omega_epsilon":0.05},"output":{"path":"z"}}"#), 0)
            .unwrap();
        assert_eq!(a.table.rows.len(), 5);
        let with = a.table.floats("p_with");
        assert!((with[0] - 0.004983355539689595).abs() < 1e-13, "{}", with[0]);
        assert!(a.diagnostics["max_closed_form_error"].as_f64().unwrap() <= 1e-12);
        assert_eq!(a.diagnostics["ratio_in_band"], true);
    }

    #[test]
    fn refine_rejected_for_qubit_kinds() {
        let c = cfg(r#"{"kind":"zeno","params":{"omega":1,"epsilon":0.05},"output":{"path":"z"}}"#);
        assert_eq!(execute(&c, 1).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn perturbativity_exit_code() {
        let c = cfg(r#"{"kind":"detector-compare","params":{"coupling_alpha":0.5},"output":{"path":"d"}}"#);
        let e = execute(&c, 0).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }

    #[test]
    fn explicit_chain() {
        let c = cfg(
            r#"{"kind":"chain","params":{"initial":[0.6,0.8],"overlaps":[[[0.7071067811865476,0.7071067811865476],[0.7071067811865476,-0.7071067811865476]]]},"output":{"path":"c"}}"#,
        );
        let a = execute(&c, 0).unwrap();
        assert_eq!(a.table.rows.len(), 1);
        assert_eq!(a.diagnostics["all_monotone"], true);
        let bad =
            cfg(r#"{"kind":"chain","params":{"initial":[0.6,0.8],"overlaps":[[[1,0],[0]]]},"output":{"path":"c"}}"#);
        let e = execute(&bad, 0).unwrap_err();
        assert!(e.to_string().contains("params.overlaps[0]"), "{e}");
    }

    #[test]
    fn realism_entropies() {
        let a =
            execute(&cfg(r#"{"kind":"realism-scenario","params":{"alpha":0.6,"beta":0.8},"output":{"path":"r"}}"#), 0)
                .unwrap();
        let h = -(0.36f64 * 0.36f64.log2() + 0.64 * 0.64f64.log2());
        let s_b = a.table.floats("s_b");
        assert!((s_b[1] - h).abs() < 1e-12 && (s_b[2] - h).abs() < 1e-12, "{s_b:?}");
        assert!(a.table.floats("s_a_given_b")[2].abs() < 1e-12);
    }

    #[test]
    fn unnormalized_realism_is_config_error() {
        let c = cfg(r#"{"kind":"realism-scenario","params":{"alpha":0.6,"beta":0.6},"output":{"path":"r"}}"#);
        assert_eq!(execute(&c, 0).unwrap_err().exit_code(), 1);
    }
}
