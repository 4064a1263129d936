//! The five experiments.

use conelab::cone::{
    cone_density, critical_rate, growth_gap, indicial_roots, link_eigenvalue, satisfies_minimizing_criterion,
    spectrum, spectrum_csv, IndicialEntry,
};
use conelab::jacobi::{
    annulus_norm, mismatch_scan, random_field, scaling_field_check, scaling_field_fd, solve_dirichlet_ball_bounded,
    three_annulus_check, JacobiMode, SpectralJacobiField,
};
use conelab::measures::{density, density_ratio, diagnostic_summary, log_radii, Center};
use conelab::plateau::{sweep_boundary, uniqueness_probe, BoundaryOffset, FoliateFamily};
use conelab::profile::{
    cone_segment, fit_decay, graph_over_cone, leading_coefficient, normalization_factor, normalize_foliate,
    scale_curve, shoot_foliate, Sign,
};
use conelab::{ConeSpec, Error};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SignChoice};
use crate::output::{read_csv_columns, Check, Writer};
use crate::plot::{Plot, Scale, Series};
use crate::RunError;

pub(crate) type Outcome = Result<Vec<Check>, RunError>;

trait At<T> {
    fn at(self, id: &str) -> Result<T, RunError>;
}

impl<T> At<T> for conelab::Result<T> {
    fn at(self, id: &str) -> Result<T, RunError> {
        self.map_err(|e| RunError::Numerics { id: id.into(), source: e })
    }
}

impl<T> At<T> for std::io::Result<T> {
    fn at(self, id: &str) -> Result<T, RunError> {
        self.map_err(|e| RunError::Io { id: id.into(), source: e })
    }
}

fn cone_of(cfg: &RunConfig) -> Result<ConeSpec, RunError> {
    ConeSpec::new(cfg.p, cfg.q).at("config.cone")
}

fn signs(choice: SignChoice) -> Vec<Sign> {
    match choice {
        SignChoice::Plus => vec![Sign::Plus],
        SignChoice::Minus => vec![Sign::Minus],
        SignChoice::Both => vec![Sign::Plus, Sign::Minus],
    }
}

fn sign_name(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

fn meta(pairs: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
    pairs.to_vec()
}

fn columns(text: &str, x: &str, y: &str) -> Vec<(f64, f64)> {
    let (header, rows) = read_csv_columns(text);
    let (Some(i), Some(j)) = (header.iter().position(|h| h == x), header.iter().position(|h| h == y)) else {
        return Vec::new();
    };
    rows.iter().map(|r| (r[i], r[j])).collect()
}

pub(crate) fn spectrum_cmd(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let cone = cone_of(cfg)?;
    let entries = spectrum(&cone, cfg.max_degree).at("spectrum.roots")?;
    let csv = spectrum_csv(&entries);
    out.csv("spectrum.csv", "spectrum", &csv).at("output.spectrum")?;

    let n = cone.n() as f64;
    let constants = cone_density(&cone);
    let gap = growth_gap(&cone, cfg.max_degree).at("spectrum.growth_gap")?;
    let minimizing = satisfies_minimizing_criterion(cfg.p, cfg.q).at("spectrum.criterion")?;
    out.json(
        "constants.json",
        &json!({
            "p": cfg.p,
            "q": cfg.q,
            "n": cone.n(),
            "cone_angle": cone.cone_angle(),
            "theta_c": constants.theta_c,
            "link_volume": constants.link_volume,
            "gamma": constants.gamma,
            "critical_rate": critical_rate(&cone),
            "growth_gap": gap,
            "minimizing_criterion": minimizing,
        }),
    )
    .at("output.constants")?;

    let mut checks = Vec::new();
    let sum_err = entries
        .iter()
        .map(|e| (e.gamma_plus + e.gamma_minus - (2.0 - n)).abs())
        .fold(0.0, f64::max);
    checks.push(Check::below("spectrum.root_sum", sum_err, 1e-12 * n, "max |γ+ + γ- - (2-n)|"));
    let prod_err = entries
        .iter()
        .map(|e| (e.gamma_plus * e.gamma_minus + e.mu).abs() / (1.0 + e.mu.abs()))
        .fold(0.0, f64::max);
    checks.push(Check::below("spectrum.root_product", prod_err, 1e-12, "max |γ+ γ- + μ| / (1 + |μ|)"));
    let rate = |k, l| -> Result<f64, RunError> {
        Ok(indicial_roots(&cone, link_eigenvalue(&cone, k, l)).at("spectrum.roots")?.0)
    };
    let translation = rate(1, 0)?.abs().max(rate(0, 1)?.abs());
    checks.push(Check::below("spectrum.translation_rate", translation, 1e-12, "|γ+| on degree (1,0), (0,1)"));
    let rotation = (rate(1, 1)? - 1.0).abs();
    checks.push(Check::below("spectrum.rotation_rate", rotation, 1e-12, "|γ+ - 1| on degree (1,1)"));
    let swapped = cone_density(&cone.swapped()).theta_c;
    checks.push(Check::below(
        "spectrum.density_swap",
        (swapped - constants.theta_c).abs(),
        1e-10,
        "|Θ(p,q) - Θ(q,p)|",
    ));
    checks.push(Check::above("spectrum.growth_gap", gap, 0.0, "distance of the roots from (2-n)/2"));
    if minimizing {
        let ok = constants.gamma > (2.0 - n) / 2.0 && constants.gamma < -1.0;
        checks.push(Check {
            value: Some(constants.gamma),
            ..Check::new("spectrum.gamma_range", ok, "(2-n)/2 < γ < -1")
        });
    }

    if cfg.plots {
        let text = std::fs::read_to_string(out.dir().join("spectrum.csv")).at("output.spectrum")?;
        let beta = critical_rate(&cone);
        let mus = columns(&text, "mu", "gamma_plus");
        let (lo, hi) = mus.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
        let svg = Plot::new("Indicial roots", "mu", "gamma", Scale::Linear, Scale::Linear)
            .with(Series::new("gamma+", mus))
            .with(Series::new("gamma-", columns(&text, "mu", "gamma_minus")))
            .with(Series::new("(2-n)/2", vec![(lo, beta), (hi, beta)]))
            .to_svg();
        out.raw("spectrum.svg", &svg).at("output.plot")?;
    }
    Ok(checks)
}

#[derive(Serialize)]
struct FitRecord {
    sign: &'static str,
    window: (f64, f64),
    valid_range: (f64, f64),
    gamma: f64,
    exponent: f64,
    coefficient: f64,
    residual: f64,
    samples: usize,
    exponent_rel_error: f64,
    doubled_coefficient: f64,
    scaling_ratio: f64,
    scaling_ratio_target: f64,
    fixed_exponent_scaling_ratio: f64,
    normalization_factor: f64,
    theta_at_r_max: f64,
    theta_c: f64,
}

pub(crate) fn foliate_cmd(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let cone = cone_of(cfg)?;
    let constants = cone_density(&cone);
    let gamma = constants.gamma;
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    for sign in signs(cfg.sign) {
        let name = sign_name(sign);
        let id = |s: &str| format!("foliate.{name}.{s}");
        let raw = shoot_foliate(&cone, sign, cfg.r_max, cfg.tol).at(&id("shoot"))?;
        out.csv(&format!("foliate_{name}.csv"), "profile", &raw.to_csv()).at("output.profile")?;
        let normalized = normalize_foliate(&raw).at(&id("normalize"))?;
        out.csv(&format!("foliate_{name}_normalized.csv"), "profile", &normalized.to_csv())
            .at("output.profile")?;
        checks.push(Check::new(id("containment"), raw.respects_containment(), "every sample in its half-space"));

        let graph = graph_over_cone(&raw).at(&id("graph"))?;
        let tag = meta(&[("p", cfg.p.to_string()), ("q", cfg.q.to_string()), ("sign", name.into())]);
        out.csv(&format!("graph_{name}.csv"), "graph", &graph.to_csv(&tag)).at("output.graph")?;
        let fit = fit_decay(&graph, cfg.fit_lo, cfg.fit_hi).at(&id("fit"))?;
        let rel = ((fit.exponent - gamma) / gamma).abs();
        checks.push(Check::below(
            id("decay_exponent"),
            rel,
            0.01,
            format!("|exponent/γ - 1| on [{}, {}]; exponent {}", cfg.fit_lo, cfg.fit_hi, fit.exponent),
        ));

        let doubled = scale_curve(&raw, 2.0).at(&id("scale"))?;
        let dgraph = graph_over_cone(&doubled).at(&id("graph"))?;
        let dfit = fit_decay(&dgraph, cfg.fit_lo, cfg.fit_hi).at(&id("fit"))?;
        let ratio = dfit.coefficient / fit.coefficient;
        let target = 2f64.powf(1.0 - gamma);
        checks.push(Check::below(
            id("scaling_ratio"),
            (ratio / target - 1.0).abs(),
            0.01,
            format!("fitted coefficient ratio of 2S vs S is {ratio}, target 2^(1-γ) = {target}"),
        ));
        let fixed_ratio = leading_coefficient(&dgraph, &cone, cfg.fit_lo, cfg.fit_hi).at(&id("fit"))?
            / leading_coefficient(&graph, &cone, cfg.fit_lo, cfg.fit_hi).at(&id("fit"))?;

        let radii = log_radii(2.0 * raw.u0, cfg.r_max, 200);
        let dens = density(&raw, Center::Origin, &radii).at(&id("density"))?;
        out.csv(&format!("density_{name}.csv"), "density", &dens.to_csv(&tag)).at("output.density")?;
        checks.push(Check::below(
            id("density_monotone"),
            dens.monotonicity_violation,
            1e-8,
            "largest relative decrease of Θ(r, 0)",
        ));
        let theta_end = *dens.theta.last().expect("nonempty grid");
        checks.push(Check::below(
            id("density_limit"),
            (theta_end / constants.theta_c - 1.0).abs(),
            0.005,
            format!("|Θ(r_max, 0)/Θ(C) - 1| at r_max = {}", cfg.r_max),
        ));

        fits.push(FitRecord {
            sign: name,
            window: (cfg.fit_lo, cfg.fit_hi),
            valid_range: graph.valid_range,
            gamma,
            exponent: fit.exponent,
            coefficient: fit.coefficient,
            residual: fit.residual,
            samples: fit.samples,
            exponent_rel_error: rel,
            doubled_coefficient: dfit.coefficient,
            scaling_ratio: ratio,
            scaling_ratio_target: target,
            fixed_exponent_scaling_ratio: fixed_ratio,
            normalization_factor: normalization_factor(&raw).at(&id("normalize"))?,
            theta_at_r_max: theta_end,
            theta_c: constants.theta_c,
        });

        if cfg.plots {
            plot_foliate(cfg, out, name, &cone)?;
        }
    }
    out.json("fit.json", &fits).at("output.fit")?;
    Ok(checks)
}

fn plot_foliate(cfg: &RunConfig, out: &mut Writer, name: &str, cone: &ConeSpec) -> Result<(), RunError> {
    let dir = out.dir().to_path_buf();
    let read = |f: String| std::fs::read_to_string(dir.join(f)).at("output.plot");
    let prof = read(format!("foliate_{name}.csv"))?;
    let th = cone.cone_angle();
    let reach = cfg.r_max.min(10.0);
    let near: Vec<(f64, f64)> = columns(&prof, "u", "v").into_iter().filter(|p| p.0.hypot(p.1) <= reach).collect();
    let svg = Plot::new(&format!("S_{name} profile"), "u", "v", Scale::Linear, Scale::Linear)
        .with(Series::new(format!("S_{name}"), near))
        .with(Series::new("cone", vec![(0.0, 0.0), (reach * th.cos(), reach * th.sin())]))
        .to_svg();
    out.raw(&format!("foliate_{name}.svg"), &svg).at("output.plot")?;

    let graph = read(format!("graph_{name}.csv"))?;
    let h: Vec<(f64, f64)> = columns(&graph, "r", "h").into_iter().map(|(r, h)| (r, h.abs())).collect();
    let svg = Plot::new(&format!("Graph of S_{name} over the cone"), "r", "|h|", Scale::Log, Scale::Log)
        .with(Series::new("|h|", h))
        .to_svg();
    out.raw(&format!("graph_{name}.svg"), &svg).at("output.plot")?;

    let dens = read(format!("density_{name}.csv"))?;
    let svg = Plot::new(&format!("Density ratio of S_{name}"), "r", "theta", Scale::Log, Scale::Linear)
        .with(Series::new("theta(r, 0)", columns(&dens, "r", "theta")))
        .to_svg();
    out.raw(&format!("density_{name}.svg"), &svg).at("output.plot")
}

/// Leaf radius used for the barrier family.
const FAMILY_R_MAX: f64 = 1e3;
const FAMILY_TOL: f64 = 1e-10;

pub(crate) fn plateau_cmd(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let cone = cone_of(cfg)?;
    let theta_c = cone_density(&cone).theta_c;
    let family = FoliateFamily::normalized(&cone, FAMILY_R_MAX, FAMILY_TOL).at("plateau.barrier_family")?;
    let sweep = sweep_boundary(&cone, cfg.t_min, cfg.t_max, cfg.samples, cfg.tol, &family).at("plateau.sweep")?;
    let tag = meta(&[("p", cfg.p.to_string()), ("q", cfg.q.to_string()), ("tol", cfg.tol.to_string())]);
    out.csv("sweep.csv", "sweep", &sweep.to_csv(&tag)).at("output.sweep")?;
    for (i, sol) in sweep.solutions.iter().enumerate() {
        out.csv(&format!("solutions/solution_{i:03}.csv"), "profile", &sol.to_csv())
            .at("output.solution")?;
    }
    if let Some((t, msg)) = sweep.failures.first() {
        return Err(RunError::Numerics {
            id: "plateau.solve".into(),
            source: Error::NonConvergence(format!("offset t = {t}: {msg} ({} offsets failed)", sweep.failures.len())),
        });
    }

    let mut checks = Vec::new();
    let mut uniq = String::from("t,clusters,converged,scan_monotone,distance_to_sweep_solution\n");
    let (mut all_unique, mut all_monotone, mut worst_match): (bool, bool, f64) = (true, true, 0.0);
    for (t, sol) in sweep.offsets.iter().zip(&sweep.solutions) {
        let off = BoundaryOffset::new(*t).at("plateau.offset")?;
        let rep = uniqueness_probe(&cone, off, cfg.starts, cfg.tol).at("plateau.uniqueness")?;
        let d = rep.clusters.iter().map(|c| c.sup_distance(sol)).fold(0.0, f64::max);
        worst_match = worst_match.max(d);
        all_unique &= rep.clusters.len() == 1;
        all_monotone &= rep.scan_monotone;
        uniq.push_str(&format!(
            "{t},{},{},{},{d}\n",
            rep.clusters.len(),
            rep.converged,
            rep.scan_monotone
        ));
    }
    out.csv("uniqueness.csv", "uniqueness", &uniq).at("output.uniqueness")?;
    checks.push(Check::new(
        "plateau.unique",
        all_unique,
        format!("one cluster per offset from {} starts (cluster radius {})", cfg.starts, 10.0 * cfg.tol),
    ));
    checks.push(Check::new("plateau.scan_monotone", all_monotone, "hit angle strictly monotone in the intercept"));
    checks.push(Check::below(
        "plateau.probe_agrees",
        worst_match,
        1e-6,
        "sup-distance between probe clusters and the sweep solution",
    ));

    let single = sweep.offsets.len() == 1;
    checks.push(Check {
        value: Some(sweep.min_pairwise_distance),
        ..Check::new(
            "plateau.disjoint",
            single || sweep.pairwise_disjoint(),
            "smallest planar distance between solutions of distinct offsets",
        )
    });
    checks.push(Check {
        value: Some(sweep.continuity_modulus),
        ..Check::new(
            "plateau.continuity",
            sweep.continuity_modulus.is_finite(),
            "max sup-distance / Δt over consecutive offsets",
        )
    });

    let order_ok = sweep.rows.iter().all(|r| r.lambda_lower <= r.lambda_upper);
    checks.push(Check::new("plateau.barrier_order", order_ok, "λ_lower ≤ λ_upper"));
    let gap = sweep.rows.iter().map(|r| r.lambda_upper - r.lambda_lower).fold(0.0, f64::max);
    checks.push(Check::below("plateau.barrier_gap", gap, 1e-6, "max λ_upper - λ_lower"));
    checks.push(Check::new(
        "plateau.barrier_monotone",
        barrier_monotone(&sweep.rows.iter().map(|r| (r.t, r.lambda_lower, r.lambda_upper)).collect::<Vec<_>>()),
        "bounds strictly increase with |t| on each side and vanish at t = 0",
    ));

    let worst_theta = sweep.rows.iter().map(|r| r.theta_at_1).fold(0.0, f64::max);
    checks.push(Check {
        value: Some(worst_theta),
        limit: Some(1.5 * theta_c),
        ..Check::new("plateau.mass_bound", sweep.all_mass_bounds_ok(), "Θ(1, 0) < (3/2) Θ(C) for every solution")
    });
    let radius_err = sweep.solutions.iter().map(|s| (s.last().r() - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::below("plateau.boundary_radius", radius_err, 1e-10, "max |boundary radius - 1|"));
    let defect = sweep.solutions.iter().map(conelab::profile::ode_defect).fold(0.0, f64::max);
    checks.push(Check::below("plateau.ode_residual", defect, 1e-8, "re-substitution defect of the profile equation"));
    let boundary = sweep
        .solutions
        .iter()
        .zip(&sweep.offsets)
        .map(|(s, t)| (s.last().theta() - (cone.cone_angle() + t)).abs())
        .fold(0.0, f64::max);
    checks.push(Check::below("plateau.boundary_match", boundary, 10.0 * cfg.tol, "max boundary angle mismatch"));

    if cfg.plots {
        let mut plot = Plot::new("Plateau solutions", "u", "v", Scale::Linear, Scale::Linear);
        for (i, t) in sweep.offsets.iter().enumerate() {
            let text = std::fs::read_to_string(out.dir().join(format!("solutions/solution_{i:03}.csv")))
                .at("output.plot")?;
            plot = plot.with(Series::new(format!("t={t}"), columns(&text, "u", "v")));
        }
        // the legend only has room for a few labels
        for s in plot.series.iter_mut().skip(6) {
            s.label.clear();
        }
        out.raw("solutions.svg", &plot.to_svg()).at("output.plot")?;
        let text = std::fs::read_to_string(out.dir().join("sweep.csv")).at("output.plot")?;
        let svg = Plot::new("Barrier bounds", "t", "lambda", Scale::Linear, Scale::Linear)
            .with(Series::new("lambda_lower", columns(&text, "t", "lambda_lower")))
            .with(Series::new("lambda_upper", columns(&text, "t", "lambda_upper")))
            .to_svg();
        out.raw("barriers.svg", &svg).at("output.plot")?;
    }
    Ok(checks)
}

/// `rows` sorted by `t`: `(t, λ_lower, λ_upper)`.
fn barrier_monotone(rows: &[(f64, f64, f64)]) -> bool {
    let zero_ok = rows.iter().filter(|r| r.0 == 0.0).all(|r| r.1 == 0.0 && r.2 == 0.0);
    let pos: Vec<_> = rows.iter().filter(|r| r.0 > 0.0).collect();
    let neg: Vec<_> = rows.iter().rev().filter(|r| r.0 < 0.0).collect();
    let increasing = |side: &[&(f64, f64, f64)]| side.windows(2).all(|w| w[1].1 > w[0].1 && w[1].2 > w[0].2);
    zero_ok && increasing(&pos) && increasing(&neg)
}

pub(crate) fn jacobi_cmd(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let cone = cone_of(cfg)?;
    let mut checks = Vec::new();

    // three-annulus property on seeded random fields
    let mut rows = String::from("seed,k,hypothesis,conclusion\n");
    let (mut violations, mut hypotheses, mut evaluated) = (0u64, 0u64, 0u64);
    for i in 0..cfg.fields {
        let seed = cfg.seed.wrapping_add(i);
        let field = random_field(&cone, cfg.max_degree, cfg.rho0, cfg.annuli, seed).at("jacobi.random_field")?;
        if i == 0 {
            out.raw("field_first.json", &(field.to_json() + "\n")).at("output.field")?;
        }
        for k in 0..=cfg.annuli - 3 {
            let o = three_annulus_check(&field, cfg.rho0, k).at("jacobi.three_annulus")?;
            evaluated += 1;
            hypotheses += o.hypothesis_holds as u64;
            violations += !o.implication_holds() as u64;
            rows.push_str(&format!("{seed},{k},{},{}\n", o.hypothesis_holds, o.conclusion_holds));
        }
    }
    out.csv("three_annulus.csv", "three-annulus", &rows).at("output.three_annulus")?;
    checks.push(Check {
        value: Some(violations as f64),
        limit: Some(0.0),
        ..Check::new(
            "jacobi.three_annulus",
            violations == 0,
            format!("violations over {evaluated} (field, k) pairs; hypothesis held in {hypotheses}"),
        )
    });

    // closed-form norm identity on pure modes
    let mut norms = String::from("k,l,root,annulus,norm,oracle\n");
    let mut worst: f64 = 0.0;
    for entry in spectrum(&cone, cfg.max_degree).at("jacobi.spectrum")? {
        for (root, a) in [("plus", entry.gamma_plus), ("minus", entry.gamma_minus)] {
            let plus = root == "plus";
            let mode = JacobiMode {
                entry,
                index: 0,
                c_plus: if plus { 1.0 } else { 0.0 },
                c_minus: if plus { 0.0 } else { 1.0 },
            };
            let field = SpectralJacobiField::new(cone, vec![mode], (0.0, 1.0)).at("jacobi.field")?;
            for k in 0..cfg.annuli {
                let v = annulus_norm(&field, cfg.rho0, k).at("jacobi.norm")?;
                let oracle = pure_mode_norm(a, cfg.rho0, k);
                worst = worst.max((v - oracle).abs() / oracle);
                norms.push_str(&format!("{},{},{root},{k},{v},{oracle}\n", entry.k, entry.l));
            }
        }
    }
    out.csv("norms.csv", "annulus-norms", &norms).at("output.norms")?;
    checks.push(Check::below("jacobi.norm_identity", worst, 1e-12, "max relative deviation from the closed form"));

    // growth-bounded Dirichlet problem
    let entries: Vec<IndicialEntry> = spectrum(&cone, cfg.max_degree).at("jacobi.spectrum")?;
    let zero: Vec<_> = entries.iter().map(|e| (*e, 0, 0.0)).collect();
    let field = solve_dirichlet_ball_bounded(&cone, &zero).at("jacobi.dirichlet")?;
    checks.push(Check::new(
        "jacobi.dirichlet_zero",
        field.is_zero() && field.modes.iter().all(|m| m.c_plus == 0.0 && m.c_minus == 0.0),
        "zero boundary data with the growth bound gives the zero field",
    ));
    let unit = solve_dirichlet_ball_bounded(&cone, &[(entries[0], 0, 1.0)]).at("jacobi.dirichlet")?;
    let m = unit.modes[0];
    checks.push(Check::new(
        "jacobi.dirichlet_regular",
        m.c_plus == 1.0 && m.c_minus == 0.0,
        "unit data on the lowest mode gives r^γ",
    ));

    // equivariant Jacobi equation along the foliate
    let raw = shoot_foliate(&cone, Sign::Plus, cfg.r_max, cfg.tol).at("jacobi.foliate")?;
    let leaf = normalize_foliate(&raw).at("jacobi.foliate")?;
    let fd = scaling_field_fd(&leaf, SCALING_DELTA).at("jacobi.scaling_field")?;
    let mut text = String::from("s,r,w\n");
    for (s, r, w) in &fd {
        text.push_str(&format!("{s},{r},{w}\n"));
    }
    out.csv("scaling_field.csv", "scaling-field", &text).at("output.scaling_field")?;
    let chk = scaling_field_check(&leaf, SCALING_DELTA, cfg.fit_lo, cfg.fit_hi).at("jacobi.scaling_field")?;
    checks.push(Check::below(
        "jacobi.scaling_residual",
        chk.residual,
        1e-4,
        "sup relative mismatch between the finite-difference field and the ODE solution",
    ));
    checks.push(Check::below(
        "jacobi.scaling_rate",
        chk.rate_error(),
        0.02,
        format!("fitted rate {} vs γ = {} on [{}, {}]", chk.fitted_rate, chk.gamma, cfg.fit_lo, cfg.fit_hi),
    ));

    let lambdas = mismatch_lambdas(cfg, raw.u0);
    let scan = mismatch_scan(&raw, &lambdas, cfg.r_match).at("jacobi.mismatch")?;
    let mut text = String::from("lambda,mismatch\n");
    for (l, m) in scan.lambdas.iter().zip(&scan.mismatches) {
        text.push_str(&format!("{l},{m}\n"));
    }
    out.csv("mismatch.csv", "mismatch", &text).at("output.mismatch")?;
    checks.push(Check::above(
        "jacobi.mismatch_floor",
        scan.min_mismatch(),
        cfg.mismatch_floor,
        format!("regular solutions matched to r^((2-n)/2) at r = {}", cfg.r_match),
    ));

    out.json(
        "jacobi.json",
        &json!({
            "scaling_field": chk,
            "mismatch_min": scan.min_mismatch(),
            "three_annulus_violations": violations,
            "three_annulus_hypotheses": hypotheses,
            "norm_identity_max_rel_error": worst,
        }),
    )
    .at("output.jacobi")?;

    if cfg.plots {
        let dir = out.dir().to_path_buf();
        let read = |f: &str| std::fs::read_to_string(dir.join(f)).at("output.plot");
        let sf = read("scaling_field.csv")?;
        let w: Vec<(f64, f64)> = columns(&sf, "r", "w").into_iter().map(|(r, w)| (r, w.abs())).collect();
        let svg = Plot::new("Scaling Jacobi field", "r", "|w|", Scale::Log, Scale::Log)
            .with(Series::new("|w|", w))
            .to_svg();
        out.raw("scaling_field.svg", &svg).at("output.plot")?;
        let mm = read("mismatch.csv")?;
        let svg = Plot::new("Shooting mismatch", "lambda", "mismatch", Scale::Log, Scale::Linear)
            .with(Series::new("mismatch", columns(&mm, "lambda", "mismatch")))
            .to_svg();
        out.raw("mismatch.svg", &svg).at("output.plot")?;
    }
    Ok(checks)
}

const SCALING_DELTA: f64 = 1e-3;
const MISMATCH_POINTS: usize = 15;

/// Leaves whose matching window `[r_match/(10λ), r_match/λ]` fits on the
/// unit leaf: from `2 r_match / r_max` up to `r_match / (20 u0)`.
fn mismatch_lambdas(cfg: &RunConfig, u0: f64) -> Vec<f64> {
    let lo = (2.0 * cfg.r_match / cfg.r_max).ln();
    let hi = (cfg.r_match / (20.0 * u0)).ln();
    (0..MISMATCH_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (MISMATCH_POINTS - 1) as f64).exp())
        .collect()
}

fn pure_mode_norm(a: f64, rho0: f64, k: i32) -> f64 {
    if a == 0.0 {
        (1.0 / rho0).ln().sqrt()
    } else {
        ((rho0.powf(2.0 * a * k as f64) - rho0.powf(2.0 * a * (k + 1) as f64)) / (2.0 * a)).sqrt()
    }
}

pub(crate) fn diagnostics_cmd(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let cone = cone_of(cfg)?;
    let mut checks = Vec::new();
    let mut summaries = serde_json::Map::new();
    let c_norm = match cfg.center {
        Center::Origin => 0.0,
        Center::XAxis(r) | Center::YAxis(r) => r.abs(),
    };
    for sign in signs(cfg.sign) {
        let name = sign_name(sign);
        let id = |s: &str| format!("diagnostics.{name}.{s}");
        let raw = shoot_foliate(&cone, sign, cfg.r_max, cfg.tol).at(&id("shoot"))?;
        let leaf = scale_curve(&normalize_foliate(&raw).at(&id("normalize"))?, cfg.lambda).at(&id("scale"))?;
        let summary = diagnostic_summary(&leaf, cfg.tau, cfg.eps, cfg.density_radius_cap).at(&id("summary"))?;
        checks.push(Check {
            value: Some(summary.theta_at_1),
            ..Check::new(id("mass_bound"), summary.mass_bound_ok, "Θ(1, 0) < (3/2) Θ(C)")
        });
        summaries.insert(name.into(), serde_json::to_value(summary).map_err(std::io::Error::other).at("output.json")?);

        let reach = leaf.last().r() - c_norm;
        let radii = log_radii(1e-3, reach.min(1.0), 120);
        let dens = density(&leaf, cfg.center, &radii).at(&id("density"))?;
        let tag = meta(&[
            ("p", cfg.p.to_string()),
            ("q", cfg.q.to_string()),
            ("sign", name.into()),
            ("lambda", cfg.lambda.to_string()),
        ]);
        out.csv(&format!("density_{name}.csv"), "density", &dens.to_csv(&tag)).at("output.density")?;
        checks.push(Check::below(
            id("density_monotone"),
            dens.monotonicity_violation,
            1e-8,
            "largest relative decrease of Θ(r, center)",
        ));
    }

    let seg = cone_segment(&cone, 2.0, 201).at("diagnostics.cone")?;
    let cone_summary = diagnostic_summary(&seg, cfg.tau, cfg.eps, cfg.density_radius_cap).at("diagnostics.cone")?;
    checks.push(Check::new(
        "diagnostics.cone.reference",
        cone_summary.density_radius == Some(0.0) && cone_summary.graphicality_radius == 0.0 && cone_summary.mass_bound_ok,
        "cone: density radius 0, graphicality radius 0, mass bound holds",
    ));
    let theta_c = cone_density(&cone).theta_c;
    let cone_theta = density_ratio(&seg, Center::Origin, 1.0).at("diagnostics.cone")?;
    checks.push(Check::below(
        "diagnostics.cone.density",
        (cone_theta / theta_c - 1.0).abs(),
        1e-12,
        "Θ(1, 0) of the cone against the closed form",
    ));
    summaries.insert(
        "cone".into(),
        serde_json::to_value(cone_summary).map_err(std::io::Error::other).at("output.json")?,
    );
    out.json("diagnostics.json", &summaries).at("output.json")?;

    if cfg.plots {
        let mut plot = Plot::new("Density ratio", "r", "theta", Scale::Log, Scale::Linear);
        for sign in signs(cfg.sign) {
            let text = std::fs::read_to_string(out.dir().join(format!("density_{}.csv", sign_name(sign))))
                .at("output.plot")?;
            plot = plot.with(Series::new(format!("S_{}", sign_name(sign)), columns(&text, "r", "theta")));
        }
        out.raw("density.svg", &plot.to_svg()).at("output.plot")?;
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_monotonicity_rule() {
        let good = [(-0.1, 0.3, 0.31), (-0.05, 0.2, 0.21), (0.0, 0.0, 0.0), (0.05, 0.2, 0.2), (0.1, 0.3, 0.3)];
        assert!(barrier_monotone(&good));
        let mut bad = good;
        bad[4].1 = 0.1;
        assert!(!barrier_monotone(&bad));
        let mut nonzero = good;
        nonzero[2].2 = 1e-3;
        assert!(!barrier_monotone(&nonzero));
    }

    #[test]
    fn pure_norm_oracle() {
        assert!((pure_mode_norm(-2.0, 0.5, 0) - 3.75f64.sqrt()).abs() < 1e-14);
        assert!((pure_mode_norm(0.0, 0.5, 3) - 2f64.ln().sqrt()).abs() < 1e-15);
    }
}
