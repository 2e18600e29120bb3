use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::output::{
    parse_nonlinearity, parse_offspring, parse_range, parse_x_grid, write_json, Sink,
};
use super::*;
use crate::bbm::{dump_tree, BbmError, GenealogyParams, SeedScheme};
use crate::estimate::{
    estimate_max_cdf, estimate_mckean_product, estimate_recursive, estimate_threshold,
    estimate_voting, CiMethod, Estimate, EstimateError, InitialDatum, PointRecord, Sampling,
    ThresholdMode, VotingMode,
};
use crate::models::{
    catalog, compile_outcome_with_arity, compile_recursive, compile_recursive_with_arity,
    compile_threshold_with_arity, default_threshold_rate, forward_nonlinearity, mckean_decompose,
    CatalogName, CatalogParams, McKeanDecomposition, McKeanTest, Model, ModelDocument, ModelError,
    OffspringDistribution, RandomThresholdModel, RecursiveModel,
};
use crate::numfmt::g17;
use crate::pde::{
    bramson_fit, front_series, pushed_speed, solve, write_fields_csv, write_front_csv, FrontConfig,
    Grid1D, PdeError, SolveConfig,
};
use crate::poly::Polynomial;

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Bbm(BbmError::PopulationExceeded { .. })
            | EstimateError::NonFinite { .. }
            | EstimateError::Pool(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BbmError> for CliError {
    fn from(e: BbmError) -> Self {
        EstimateError::from(e).into()
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Unstable { .. } | PdeError::NoCrossing { .. } => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Validation(message.into())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Compile(a) => run_compile(g, a),
        Command::Nonlinearity(a) => run_nonlinearity(g, a),
        Command::Decompose(a) => run_decompose(g, a),
        Command::Catalog(a) => run_catalog(g, a),
        Command::Simulate(a) => run_simulate(g, a),
        Command::Solve(a) => run_solve(g, a),
        Command::Compare(a) => run_compare(g, a),
        Command::Front(a) => run_front(g, a),
        Command::Maxdist(a) => run_maxdist(g, a),
    }
}

fn report(g: &GlobalArgs, line: impl AsRef<str>) {
    if !g.quiet {
        eprintln!("{}", line.as_ref());
    }
}

fn law_text(law: &OffspringDistribution) -> String {
    let parts: Vec<String> = law
        .probs()
        .iter()
        .map(|&(k, p)| format!("{k}:{p}"))
        .collect();
    parts.join(",")
}

fn compile(
    f: &Polynomial,
    kind: Kind,
    rate: Option<f64>,
    arity: Option<usize>,
    monotone: bool,
) -> Result<Model, CliError> {
    let poly_err = |e: crate::poly::PolyError| invalid(e.to_string());
    let natural = f.degree().max(2);
    Ok(match kind {
        Kind::Outcome => {
            let arity = arity.unwrap_or(natural);
            let rate = match (rate, monotone) {
                (None, true) if arity >= f.degree() => Some(default_threshold_rate(
                    &f.to_bernstein(arity).map_err(poly_err)?,
                )),
                _ => rate,
            };
            compile_outcome_with_arity(f, arity, rate)?.into()
        }
        Kind::Threshold => compile_threshold_with_arity(f, arity.unwrap_or(natural), rate)?.into(),
        Kind::Recursive => {
            if rate.is_some_and(|r| r != RecursiveModel::RATE) {
                return Err(invalid("recursive models branch at rate 1; drop --rate"));
            }
            match arity {
                Some(a) => compile_recursive_with_arity(f, a)?.into(),
                None => compile_recursive(f)?.into(),
            }
        }
    })
}

fn catalog_params(p: &CatalogParamArgs) -> Result<CatalogParams, CliError> {
    Ok(CatalogParams {
        offspring: p.offspring.as_deref().map(parse_offspring).transpose()?,
        rate: p.rate,
        gamma: p.gamma,
        m: p.group_m,
        n: p.evs_n,
        chi: p.chi,
    })
}

fn read_model(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    ModelDocument::read(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// The model and a short identifier for output rows.
fn resolve_model(a: &ModelArgs) -> Result<(Model, String), CliError> {
    if let Some(path) = &a.model {
        return Ok((read_model(path)?, path.display().to_string()));
    }
    if let Some(name) = &a.catalog {
        let name: CatalogName = name.parse()?;
        return Ok((
            catalog(name, &catalog_params(&a.params)?)?,
            name.as_str().to_string(),
        ));
    }
    if let Some(spec) = &a.f {
        let f = parse_nonlinearity(spec)?;
        let model = compile(&f, a.kind, a.params.rate, a.arity, a.monotone)?;
        return Ok((model, format!("{}[{f}]", model_kind(a.kind))));
    }
    Err(invalid(
        "a model is required: pass --model, --f or --catalog",
    ))
}

fn model_kind(kind: Kind) -> &'static str {
    match kind {
        Kind::Outcome => "outcome",
        Kind::Threshold => "threshold",
        Kind::Recursive => "recursive",
    }
}

/// `--f` as given, otherwise the forward map of the model.
fn resolve_nonlinearity(a: &ModelArgs) -> Result<(Polynomial, String), CliError> {
    if let Some(spec) = &a.f {
        let f = parse_nonlinearity(spec)?;
        let id = f.to_string();
        return Ok((f, id));
    }
    let (model, id) = resolve_model(a)?;
    Ok((forward_nonlinearity(&model), id))
}

fn parse_datum(spec: &str) -> Result<InitialDatum, CliError> {
    spec.parse()
        .map_err(|e: crate::estimate::DatumError| invalid(e.to_string()))
}

fn sampling(s: &SampleArgs, workers: usize) -> Sampling {
    Sampling {
        population_cap: s.population_cap,
        ci: ci_method(s.ci),
        ..Sampling::new(s.n, s.seed).workers(workers)
    }
}

fn ci_method(ci: Ci) -> CiMethod {
    match ci {
        Ci::Normal => CiMethod::Normal,
        Ci::Wilson => CiMethod::Wilson,
    }
}

enum Plan<'a> {
    Voting(&'a Model, VotingMode),
    Threshold(&'a RandomThresholdModel, ThresholdMode),
    Recursive(&'a RecursiveModel),
    Product(GenealogyParams),
}

impl Plan<'_> {
    fn label(&self) -> String {
        match self {
            Plan::Voting(_, m) => m.to_string(),
            Plan::Threshold(_, m) => m.to_string(),
            Plan::Recursive(_) => "recursive".into(),
            Plan::Product(_) => "product".into(),
        }
    }

    fn run(
        &self,
        g: &InitialDatum,
        t: f64,
        x: f64,
        s: &Sampling,
    ) -> Result<Estimate, EstimateError> {
        match self {
            Plan::Voting(m, mode) => estimate_voting(m, g, t, &[x], s, *mode),
            Plan::Threshold(m, mode) => estimate_threshold(m, g, t, &[x], s, *mode),
            Plan::Recursive(m) => estimate_recursive(m, g, t, &[x], s),
            Plan::Product(p) => estimate_mckean_product(p, g, t, &[x], s),
        }
    }
}

fn plan<'a>(model: &'a Model, s: &SampleArgs) -> Result<Plan<'a>, CliError> {
    let mode = s.mode.as_deref();
    let voting = |mode: Option<&str>| -> Result<VotingMode, CliError> {
        mode.map_or(Ok(VotingMode::default()), |m| m.parse().map_err(invalid))
    };
    let no_mode = |what: &str| match mode {
        Some(m) => Err(invalid(format!(
            "--mode {m} does not apply to the {what} estimator"
        ))),
        None => Ok(()),
    };
    match (s.estimator, model) {
        (Estimator::Auto | Estimator::Threshold, Model::Threshold(m)) => {
            match mode.map(str::parse::<ThresholdMode>) {
                None => Ok(Plan::Threshold(m, ThresholdMode::default())),
                Some(Ok(tm)) => Ok(Plan::Threshold(m, tm)),
                Some(Err(e)) if s.estimator == Estimator::Threshold => Err(invalid(e)),
                Some(Err(_)) => Ok(Plan::Voting(model, voting(mode)?)),
            }
        }
        (Estimator::Threshold, _) => Err(invalid(format!(
            "the threshold estimator needs a threshold model, got {}",
            model.kind()
        ))),
        (Estimator::Auto | Estimator::Recursive, Model::Recursive(m)) => {
            no_mode("recursive")?;
            Ok(Plan::Recursive(m))
        }
        (Estimator::Recursive, _) => Err(invalid(format!(
            "the recursive estimator needs a recursive model, got {}",
            model.kind()
        ))),
        (Estimator::Voting, Model::Recursive(_)) => Err(invalid(
            "recursive models are not voting models; use --estimator recursive",
        )),
        (Estimator::Auto | Estimator::Voting, _) => Ok(Plan::Voting(model, voting(mode)?)),
        (Estimator::Product, _) => {
            no_mode("product")?;
            Ok(Plan::Product(GenealogyParams::new(
                model.rate(),
                model.offspring(),
                1,
            )?))
        }
    }
}

fn point_header() -> &'static str {
    "x,t,mean,std_error,n,mode,model\n"
}

fn point_row(r: &PointRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        g17(r.x),
        g17(r.t),
        g17(r.mean),
        g17(r.std_error),
        r.n,
        r.mode,
        r.model
    )
}

fn warn_all(g: &GlobalArgs, x: f64, e: &Estimate) {
    for w in &e.warnings {
        report(g, format!("warning at x = {x}: {w}"));
    }
}

fn run_compile(g: &GlobalArgs, a: &CompileArgs) -> Result<(), CliError> {
    let f = parse_nonlinearity(&a.f)?;
    let model = compile(&f, a.kind, a.rate, a.arity, a.monotone)?;
    let mut sink = Sink::with_header(g.output.as_deref(), "compile", a)?;
    sink.write_str(&ModelDocument::write(&model))?;
    sink.finish()?;
    report(
        g,
        format!(
            "compiled {} model: rate {}, offspring {}, f = {f}",
            model.kind(),
            model.rate(),
            law_text(&model.offspring())
        ),
    );
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({
                "command": "compile",
                "kind": model.kind(),
                "rate": model.rate(),
                "offspring": law_text(&model.offspring()),
                "f": f.to_list(),
            }),
        )?;
    }
    Ok(())
}

fn run_nonlinearity(g: &GlobalArgs, a: &NonlinearityArgs) -> Result<(), CliError> {
    let model = read_model(&a.model)?;
    let f = forward_nonlinearity(&model);
    let text = if a.list { f.to_list() } else { f.to_string() };
    let mut sink = Sink::open(g.output.as_deref())?;
    sink.write_str(&format!("{text}\n"))?;
    sink.finish()?;
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({ "command": "nonlinearity", "kind": model.kind(), "f": f.to_list(), "text": f.to_string() }),
        )?;
    }
    Ok(())
}

fn run_decompose(g: &GlobalArgs, a: &DecomposeArgs) -> Result<(), CliError> {
    let f = parse_nonlinearity(&a.f)?;
    let (line, summary) = match mckean_decompose(&f)? {
        McKeanTest::McKean(d) => (
            format!(
                "mckean: rate {} offspring {} lambda {}",
                d.rate,
                law_text(&d.offspring),
                d.lambda
            ),
            json!({ "command": "decompose", "mckean": true, "rate": d.rate, "offspring": law_text(&d.offspring), "lambda": d.lambda }),
        ),
        McKeanTest::NotMcKean(why) => (
            format!("not mckean: {why}"),
            json!({ "command": "decompose", "mckean": false, "reason": why.to_string() }),
        ),
    };
    let mut sink = Sink::open(g.output.as_deref())?;
    sink.write_str(&format!("{line}\n"))?;
    sink.finish()?;
    if let Some(path) = &g.json {
        write_json(path, &summary)?;
    }
    Ok(())
}

fn run_catalog(g: &GlobalArgs, a: &CatalogArgs) -> Result<(), CliError> {
    let Some(name) = &a.name else {
        let mut sink = Sink::open(g.output.as_deref())?;
        for n in CatalogName::ALL {
            sink.write_str(&format!("{:<16}{}\n", n.as_str(), n.describe()))?;
        }
        return sink.finish();
    };
    let name: CatalogName = name.parse()?;
    let model = catalog(name, &catalog_params(&a.params)?)?;
    let mut sink = Sink::with_header(g.output.as_deref(), "catalog", a)?;
    sink.write_str(&ModelDocument::write(&model))?;
    sink.finish()?;
    report(g, format!("{name}: f = {}", forward_nonlinearity(&model)));
    if let Some(path) = &g.json {
        let f = forward_nonlinearity(&model);
        write_json(
            path,
            &json!({ "command": "catalog", "name": name.as_str(), "kind": model.kind(), "rate": model.rate(), "f": f.to_list() }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PointSummary {
    #[serde(flatten)]
    record: PointRecord,
    ci_low: f64,
    ci_high: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

fn run_simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<(), CliError> {
    let (model, id) = resolve_model(&a.model)?;
    let datum = parse_datum(&a.problem.datum)?;
    let xs = parse_x_grid(&a.problem.x).map_err(invalid)?;
    let plan = plan(&model, &a.sample)?;
    let s = sampling(&a.sample, g.workers);
    let t = a.problem.t;

    if let Some(path) = &a.dump_tree {
        let params = GenealogyParams::new(model.rate(), model.offspring(), 1)?;
        let outline = dump_tree(&params, t, &[xs[0]], SeedScheme::new(s.seed).replicate(0))?;
        std::fs::write(path, outline).map_err(|e| super::output::io_error(Some(path), e))?;
    }

    let mut points = Vec::with_capacity(xs.len());
    for &x in &xs {
        let e = plan.run(&datum, t, x, &s)?;
        warn_all(g, x, &e);
        let record = PointRecord {
            x,
            t,
            mean: e.mean,
            std_error: e.std_error,
            n: e.n_replicates,
            mode: plan.label(),
            model: id.clone(),
        };
        points.push(PointSummary {
            record,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            warnings: e.warnings,
        });
    }
    let mut sink = Sink::with_header(g.output.as_deref(), "simulate", a)?;
    sink.write_str(point_header())?;
    for p in &points {
        sink.write_str(&point_row(&p.record))?;
    }
    sink.finish()?;
    report(
        g,
        format!(
            "simulate: {} points x {} replicates, {} estimator, model {id}",
            xs.len(),
            s.n_replicates,
            plan.label()
        ),
    );
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({ "command": "simulate", "model": id, "points": points }),
        )?;
    }
    Ok(())
}

fn grid(a: &GridArgs) -> Result<(Grid1D, SolveConfig), CliError> {
    let (lo, hi) = parse_range(&a.domain).map_err(invalid)?;
    if !(a.dx > 0.0 && a.dx.is_finite()) {
        return Err(invalid(format!("--dx must be positive, got {}", a.dx)));
    }
    let cfg = SolveConfig {
        dt: a.dt,
        reaction_substeps: a.substeps,
        ..SolveConfig::default()
    };
    Ok((Grid1D::with_spacing(lo, hi, a.dx)?, cfg))
}

fn run_solve(g: &GlobalArgs, a: &SolveArgs) -> Result<(), CliError> {
    let (f, id) = resolve_nonlinearity(&a.model)?;
    let datum = parse_datum(&a.datum)?;
    let (grid, mut cfg) = grid(&a.grid)?;
    cfg.snapshot_every = a.snapshot_every;
    let sol = solve(&f, &datum, grid, a.t, &cfg)?;
    let mut sink = Sink::with_header(g.output.as_deref(), "solve", a)?;
    let fields = if sol.snapshots.is_empty() {
        std::slice::from_ref(&sol.field)
    } else {
        &sol.snapshots[..]
    };
    write_fields_csv(sink.writer(), fields).map_err(|e| sink.map_io(e))?;
    sink.finish()?;
    report(
        g,
        format!(
            "solve: f = {id}, {} points, {} steps of dt = {}",
            grid.n_points(),
            sol.steps,
            sol.dt
        ),
    );
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({
                "command": "solve",
                "f": f.to_list(),
                "dx": grid.dx(),
                "dt": sol.dt,
                "steps": sol.steps,
                "integral": sol.field.integral(),
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparePoint {
    x: f64,
    t: f64,
    mc: f64,
    std_error: f64,
    pde: f64,
    diff: f64,
    z: f64,
    pass: bool,
}

fn run_compare(g: &GlobalArgs, a: &CompareArgs) -> Result<(), CliError> {
    let (model, id) = resolve_model(&a.model)?;
    let f = match &a.model.f {
        Some(spec) => parse_nonlinearity(spec)?,
        None => forward_nonlinearity(&model),
    };
    let datum = parse_datum(&a.problem.datum)?;
    let xs = parse_x_grid(&a.problem.x).map_err(invalid)?;
    let plan = plan(&model, &a.sample)?;
    let s = sampling(&a.sample, g.workers);
    let t = a.problem.t;
    let (grid, cfg) = grid(&a.grid)?;
    let field = solve(&f, &datum, grid, t, &cfg)?.field;

    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let e = plan.run(&datum, t, x, &s)?;
        warn_all(g, x, &e);
        let pde = field.at(x);
        let diff = e.mean - pde;
        let pass = diff.abs() <= a.z_max * e.std_error + a.allowance;
        rows.push(ComparePoint {
            x,
            t,
            mc: e.mean,
            std_error: e.std_error,
            pde,
            diff,
            z: e.z_score(pde),
            pass,
        });
    }
    let mut sink = Sink::with_header(g.output.as_deref(), "compare", a)?;
    sink.write_str("x,t,mc,std_error,pde,diff,z,pass,n,mode,model\n")?;
    for r in &rows {
        sink.write_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            g17(r.x),
            g17(r.t),
            g17(r.mc),
            g17(r.std_error),
            g17(r.pde),
            g17(r.diff),
            g17(r.z),
            r.pass,
            s.n_replicates,
            plan.label(),
            id
        ))?;
    }
    sink.finish()?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    report(
        g,
        format!(
            "compare: {}/{} points within {} SE + {}, max |z| = {worst:.3}",
            rows.len() - failed,
            rows.len(),
            a.z_max,
            a.allowance
        ),
    );
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({ "command": "compare", "model": id, "f": f.to_list(), "failed": failed, "max_abs_z": worst, "points": rows }),
        )?;
    }
    if a.assert && failed > 0 {
        return Err(CliError::Assertion(format!(
            "{failed} of {} points outside the tolerance",
            rows.len()
        )));
    }
    Ok(())
}

fn run_front(g: &GlobalArgs, a: &FrontArgs) -> Result<(), CliError> {
    let (f, id) = resolve_nonlinearity(&a.model)?;
    let datum = parse_datum(&a.datum)?;
    let window = parse_range(&a.window).map_err(invalid)?;
    let cfg = FrontConfig {
        dx: a.dx,
        dt: a.dt,
        half_width: a.half_width,
        regrid_every: a.regrid_every,
        sample_every: a.sample_every,
        level: a.level,
        t_end: a.t_end,
        reaction_substeps: 1,
    };
    let series = front_series(&f, &datum, &cfg)?;
    let mut sink = Sink::with_header(g.output.as_deref(), "front", a)?;
    write_front_csv(sink.writer(), &series).map_err(|e| sink.map_io(e))?;
    sink.finish()?;

    let slope = f.derivative().eval(0.0);
    let bramson = bramson_fit(&series, slope, window);
    let pushed = pushed_speed(&series, window);
    let last = series.last().expect("initial sample");
    let mean_speed = if last.t > 0.0 {
        last.x / last.t
    } else {
        f64::NAN
    };
    match &bramson {
        Ok(fit) => report(
            g,
            format!(
                "front: f = {id}; X(t) - {:.6} t = {:.4} log t + {:.4} on [{}, {}], rms {:.2e}",
                fit.speed, fit.log_slope, fit.intercept, window.0, window.1, fit.residual
            ),
        ),
        Err(e) => report(g, format!("front: f = {id}; no pulled fit: {e}")),
    }
    match &pushed {
        Ok(c) => report(
            g,
            format!("front: fitted speed {c:.6}, X(T)/T = {mean_speed:.6}"),
        ),
        Err(e) => report(g, format!("front: no speed fit: {e}")),
    }
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({
                "command": "front",
                "f": f.to_list(),
                "f_prime_0": slope,
                "bramson": bramson.as_ref().ok(),
                "pushed_speed": pushed.as_ref().ok(),
                "mean_speed": mean_speed,
            }),
        )?;
    }
    pushed.map(|_| ()).map_err(CliError::from)
}

fn run_maxdist(g: &GlobalArgs, a: &MaxdistArgs) -> Result<(), CliError> {
    let law = parse_offspring(&a.offspring)?;
    let params = GenealogyParams::new(a.rate, law.clone(), 1)?;
    let xs = parse_x_grid(&a.x).map_err(invalid)?;
    let s = Sampling {
        population_cap: a.population_cap,
        ci: ci_method(a.ci),
        ..Sampling::new(a.n, a.seed).workers(g.workers)
    };
    let estimates = estimate_max_cdf(&params, a.t, &xs, &s)?;
    let lambda = a.rate * (law.mean() - 1.0);
    let f = McKeanDecomposition {
        rate: a.rate,
        offspring: law,
        lambda,
    }
    .nonlinearity();
    let (grid, cfg) = grid(&a.grid)?;
    let field = solve(&f, &InitialDatum::step(), grid, a.t, &cfg)?.field;

    let mut sink = Sink::with_header(g.output.as_deref(), "maxdist", a)?;
    sink.write_str("x,t,mc,std_error,pde,diff,z,n\n")?;
    let mut rows = Vec::with_capacity(xs.len());
    for (&x, e) in xs.iter().zip(&estimates) {
        let pde = field.at(x);
        let z = e.z_score(pde);
        sink.write_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            g17(x),
            g17(a.t),
            g17(e.mean),
            g17(e.std_error),
            g17(pde),
            g17(e.mean - pde),
            g17(z),
            e.n_replicates
        ))?;
        rows.push(json!({ "x": x, "mc": e.mean, "std_error": e.std_error, "pde": pde, "z": z }));
    }
    sink.finish()?;
    let worst = rows
        .iter()
        .filter_map(|r| r["z"].as_f64())
        .map(f64::abs)
        .fold(0.0, f64::max);
    report(
        g,
        format!(
            "maxdist: P(M_t > x) at {} points, f = {f}, max |z| = {worst:.3}",
            xs.len()
        ),
    );
    if let Some(path) = &g.json {
        write_json(
            path,
            &json!({ "command": "maxdist", "f": f.to_list(), "points": rows }),
        )?;
    }
    Ok(())
}
