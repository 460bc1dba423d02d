use qnr_core::essential::{
    convex_combination_sequence, essential_bild, essential_upper, truncate, we_membership, ModelOperator, DEFAULT_CHECK,
};
use qnr_core::lancaster::{lancaster_from_regions, nonclosedness_from_regions, section_regions, IconvRegion, LancasterReport, ProbeReport};
use qnr_core::nr::{upper_bild, BildConfig, BildRegion};
use qnr_core::rng::stream;
use qnr_core::spectrum::{direct_sum_spectrum, s_spectrum};
use qnr_core::{ConvexPolygon, DirectSum, Point2, QMatrix, Quaternion, SimilaritySphere};
use serde::Serialize;
use serde_json::{json, Value};

use crate::input::{Input, ProbeEdge};
use crate::output::{csv, point_csv, OutputDir, Svg};
use crate::{CliError, RunConfig};

/// Residual bound for an edge declared attained.
const CLOSED_EDGE_TOLERANCE: f64 = 1e-9;
/// Section size for the spectral inclusion check.
const SPECTRAL_SECTION: usize = 200;
/// Section for the nested membership construction, which needs many symbols near each vertex.
const MEMBERSHIP_SECTION: usize = 4 * DEFAULT_CHECK;
/// Slack for truncation spectra around `B_e ∪ σ(block)`.
const SPECTRAL_SLACK: f64 = 1e-3;

fn bild_config(config: &RunConfig) -> BildConfig {
    BildConfig {
        samples: config.samples,
        angles: config.angles,
        seed: config.seed,
        refine: true,
    }
}

fn last_section(config: &RunConfig) -> usize {
    *config.sections.last().expect("sections are checked nonempty")
}

/// The operator whose finite bild is computed: the matrix itself, or a section.
fn finite_operator(config: &RunConfig, input: &Input) -> Result<(DirectSum, Option<usize>), CliError> {
    Ok(match input {
        Input::Matrix(m) => (DirectSum::from(m), None),
        Input::Operator(model, _) => {
            let n = last_section(config);
            (truncate(model, n)?.operator().clone(), Some(n))
        }
    })
}

pub fn bild(config: &RunConfig, input: &Input, out: &mut OutputDir) -> Result<(Value, bool), CliError> {
    let (op, section) = finite_operator(config, input)?;
    let region = upper_bild(&op, &bild_config(config))?;
    out.write("bild_inner.csv", &point_csv(region.inner_hull.vertices()))?;
    out.write("bild_outer.csv", &point_csv(region.outer_polygon.vertices()))?;
    out.write(
        "supports.csv",
        &csv(&["theta", "h"], region.supports.iter().map(|s| vec![Some(s.theta), Some(s.value)])),
    )?;
    if config.svg {
        let mut svg = Svg::new(region.outer_polygon.vertices());
        svg.polygon(region.outer_polygon.vertices(), "none", "#444", 0.0);
        svg.polygon(region.inner_hull.vertices(), "#4a7ab5", "#1f4e8c", 0.4);
        out.write("bild.svg", &svg.finish())?;
    }
    let body = json!({
        "dim": op.dim(),
        "section": section,
        "norm_bound": region.norm_bound,
        "attained_points": region.inner_points.len(),
        "hausdorff_gap": region.hausdorff_gap,
        "inner_hull": region.inner_hull.vertices(),
        "outer_polygon": region.outer_polygon.vertices(),
    });
    Ok((body, true))
}

pub fn essential(_config: &RunConfig, input: &Input, out: &mut OutputDir) -> Result<(Value, bool), CliError> {
    let model = input.model();
    let validation = model.validate(DEFAULT_CHECK);
    let poly = essential_bild(&model)?;
    let upper = essential_upper(&model)?;
    out.write("essential.csv", &point_csv(&poly.sorted_vertices()))?;
    let body = json!({
        "essential_bild": poly.sorted_vertices(),
        "essential_upper": upper.sorted_vertices(),
        "limit_set_checked": DEFAULT_CHECK,
        "limit_set_error": validation.as_ref().err().map(ToString::to_string),
    });
    Ok((body, validation.is_ok()))
}

#[derive(Serialize)]
struct ProbeOutcome {
    #[serde(flatten)]
    report: ProbeReport,
    closed: bool,
    passed: bool,
}

fn probe_outcome(regions: &[(usize, BildRegion)], probe: &ProbeEdge) -> ProbeOutcome {
    let report = nonclosedness_from_regions(regions, probe.edge);
    let passed = if probe.closed {
        report.residuals.iter().all(|r| r.1 <= CLOSED_EDGE_TOLERANCE)
    } else {
        report.all_positive && report.strictly_decreasing
    };
    ProbeOutcome {
        report,
        closed: probe.closed,
        passed,
    }
}

struct LancasterStage {
    report: LancasterReport,
    probes: Vec<ProbeOutcome>,
    regions: Vec<(usize, BildRegion)>,
    iconvs: Vec<IconvRegion>,
    target: Option<ConvexPolygon>,
}

impl LancasterStage {
    fn passed(&self) -> bool {
        self.report.passed && self.probes.iter().all(|p| p.passed)
    }
}

fn lancaster_stage(config: &RunConfig, input: &Input) -> Result<LancasterStage, CliError> {
    let model = input.model();
    let expect = input.expectations();
    let target = expect.closure_target.as_deref().map(ConvexPolygon::hull).transpose()?;
    let regions = section_regions(&model, &config.sections, &bild_config(config))?;
    let (report, iconvs) = lancaster_from_regions(&model, &regions, target.as_ref(), config.tol)?;
    let probes = expect.probe_edges.iter().map(|p| probe_outcome(&regions, p)).collect();
    Ok(LancasterStage {
        report,
        probes,
        regions,
        iconvs,
        target,
    })
}

pub fn lancaster(config: &RunConfig, input: &Input, out: &mut OutputDir) -> Result<(Value, bool), CliError> {
    let stage = lancaster_stage(config, input)?;
    let mut header = vec!["section", "to_target", "to_inner_hull", "to_outer", "bild_gap", "satellites"];
    let names: Vec<String> = (0..stage.probes.len()).map(|k| format!("residual_{k}")).collect();
    header.extend(names.iter().map(String::as_str));
    let rows = stage.report.rows.iter().enumerate().map(|(i, r)| {
        let mut row = vec![
            Some(r.section as f64),
            r.to_target,
            Some(r.to_inner_hull),
            Some(r.to_outer),
            Some(r.bild_gap),
            Some(r.satellites as f64),
        ];
        row.extend(stage.probes.iter().map(|p| Some(p.report.residuals[i].1)));
        row
    });
    out.write("lancaster.csv", &csv(&header, rows))?;
    if config.svg {
        let model = input.model();
        let (_, region) = stage.regions.last().expect("sections are nonempty");
        let upper = essential_upper(&model)?;
        let mut frame: Vec<Point2> = region.inner_hull.vertices().to_vec();
        frame.extend_from_slice(upper.vertices());
        let mut svg = Svg::new(&frame);
        if let Some(t) = &stage.target {
            svg.polygon(t.vertices(), "none", "#999", 0.0);
        }
        for m in &stage.iconvs.last().expect("sections are nonempty").members {
            svg.polygon(m.vertices(), "#e0a040", "none", 0.15);
        }
        svg.polygon(region.inner_hull.vertices(), "none", "#1f4e8c", 0.0);
        svg.polygon(upper.vertices(), "#c03030", "#c03030", 0.8);
        out.write("lancaster.svg", &svg.finish())?;
    }
    let passed = stage.passed();
    let body = json!({
        "essential_upper": essential_upper(&input.model())?.sorted_vertices(),
        "closure_target": stage.target.as_ref().map(ConvexPolygon::sorted_vertices),
        "report": stage.report,
        "probes": stage.probes,
    });
    Ok((body, passed))
}

pub fn sspec(config: &RunConfig, input: &Input, out: &mut OutputDir) -> Result<(Value, bool), CliError> {
    let (spheres, section) = match input {
        Input::Matrix(m) => (s_spectrum(m)?, None),
        Input::Operator(..) => {
            let (op, n) = finite_operator(config, input)?;
            (direct_sum_spectrum(&op)?, n)
        }
    };
    out.write(
        "spheres.csv",
        &csv(&["a", "b"], spheres.spheres().iter().map(|s| vec![Some(s.a), Some(s.b)])),
    )?;
    Ok((json!({ "section": section, "spheres": spheres }), true))
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: Value,
}

fn check(name: &'static str, passed: bool, detail: Value) -> Check {
    Check { name, passed, detail }
}

fn complex_of(p: Point2) -> Quaternion {
    Quaternion::complex(p.x, p.y)
}

/// Farthest pair among the hull vertices of the declared limit points.
fn extreme_limit_pair(model: &ModelOperator) -> Result<(Point2, Point2), CliError> {
    let points: Vec<Point2> = model.limit_set().iter().flat_map(|l| l.points()).collect();
    let hull = ConvexPolygon::hull(&points)?;
    let v = hull.vertices();
    let mut best = (0.0, v[0], v[0]);
    for (i, &a) in v.iter().enumerate() {
        for &b in &v[i + 1..] {
            if a.distance(b) > best.0 {
                best = (a.distance(b), a, b);
            }
        }
    }
    Ok((best.1, best.2))
}

/// Combination sequences between two declared limit spheres.
fn convexity_check(model: &ModelOperator, depth: usize) -> Result<Check, CliError> {
    let (p1, p2) = extreme_limit_pair(model)?;
    let (w1, w2) = (complex_of(p1), complex_of(p2));
    let t = truncate(model, DEFAULT_CHECK)?;
    let tol = 5.0 * (2.0 + model.norm_bound()) / depth as f64;
    let mut worst = 0.0f64;
    let mut bounds_ok = true;
    for k in 0..=4 {
        let alpha_sq = k as f64 / 4.0;
        let c = match convex_combination_sequence(&t, w1, w2, alpha_sq, depth) {
            Ok(c) => c,
            Err(e) => return Ok(check("convexity", false, json!({ "error": e.to_string() }))),
        };
        let last = *c.sequence.values.last().expect("depth ≥ 1");
        worst = worst.max((last - c.sequence.target).norm());
        bounds_ok &= c.steps.iter().all(|s| s.bounds.iter().all(|&b| b <= 1.0 / s.p as f64));
    }
    Ok(check(
        "convexity",
        worst <= tol && bounds_ok,
        json!({ "omega1": p1, "omega2": p2, "worst_error": worst, "tolerance": tol, "quasi_orth_bounds_ok": bounds_ok }),
    ))
}

/// Largest distance from the spheres of `s_n`, `n ∈ (lo, hi]`, to `B_e ∪ σ(block)`.
fn tail_spectral_distance(model: &ModelOperator, lo: usize, hi: usize) -> Result<f64, CliError> {
    let t = truncate(model, hi)?;
    let tail = DirectSum::new(vec![], t.operator().diagonal()[lo..hi].to_vec());
    let spheres = direct_sum_spectrum(&tail)?;
    let block = s_spectrum(model.block())?;
    let poly = essential_bild(model)?;
    Ok(spheres
        .spheres()
        .iter()
        .map(|&s: &SimilaritySphere| poly.distance(Point2::new(s.a, s.b)).min(block.distance(s)))
        .fold(0.0, f64::max))
}

/// Spectra of sections accumulate only inside `B_e ∪ σ(block)`.
///
/// Isolated eigenvalues of the tail may sit anywhere, so only the spheres added
/// in the second half of the section are measured: they must be within the
/// slack, or closer than those added in the half before.
fn spectral_check(model: &ModelOperator) -> Result<Check, CliError> {
    let n = SPECTRAL_SECTION;
    let late = tail_spectral_distance(model, n / 2, n)?;
    let early = tail_spectral_distance(model, n / 4, n / 2)?;
    Ok(check(
        "spectral_inclusion",
        late <= SPECTRAL_SLACK || late < early,
        json!({ "section": n, "late_distance": late, "early_distance": early, "slack": SPECTRAL_SLACK }),
    ))
}

pub fn verify(config: &RunConfig, input: &Input, out: &mut OutputDir) -> Result<(Value, bool), CliError> {
    let model = input.model();
    let poly = essential_bild(&model)?;
    let mut checks = Vec::new();

    let validation = model.validate(DEFAULT_CHECK);
    checks.push(check(
        "limit_set",
        validation.is_ok(),
        json!({ "checked": DEFAULT_CHECK, "error": validation.as_ref().err().map(ToString::to_string) }),
    ));

    let mut rng = stream(config.seed, "verify_block", 0);
    let other = model.with_block(QMatrix::random_gaussian(model.block().n().max(1), &mut rng));
    checks.push(check("compact_invariance", essential_bild(&other)? == poly, Value::Null));
    checks.push(check("adjoint_invariance", essential_bild(&model.adjoint())? == poly, Value::Null));
    let (a, b) = (2.0, -1.0);
    let image = essential_bild(&model.affine(a, b))?.sorted_vertices();
    let mapped = poly.map_affine(a, b, a, 0.0).sorted_vertices();
    checks.push(check("affine_image", image == mapped, json!({ "a": a, "b": b })));
    let outside = model
        .limit_set()
        .iter()
        .flat_map(|l| l.points())
        .map(|p| poly.distance(p))
        .fold(0.0, f64::max);
    checks.push(check("limit_spheres_inside", outside == 0.0, json!({ "max_distance": outside })));

    checks.push(convexity_check(&model, config.depth)?);

    let verts = poly.vertices();
    let centroid = verts
        .iter()
        .fold(Point2::new(0.0, 0.0), |acc, &v| acc + v)
        .scale(1.0 / verts.len() as f64);
    let t = truncate(&model, MEMBERSHIP_SECTION)?;
    let tol = 5.0 * (2.0 + model.norm_bound()) / config.depth as f64;
    let membership = match we_membership(&t, &model, complex_of(centroid), 1e-9, config.depth) {
        Ok(m) => {
            let ok = m.member && m.sequence_error.is_some_and(|e| e <= tol);
            check("membership", ok, json!({ "point": centroid, "result": m, "tolerance": tol }))
        }
        Err(e) => check("membership", false, json!({ "point": centroid, "error": e.to_string() })),
    };
    checks.push(membership);

    checks.push(spectral_check(&model)?);

    let expect = input.expectations();
    let lancaster = if expect.closure_target.is_some() || !expect.probe_edges.is_empty() {
        let stage = lancaster_stage(config, input)?;
        checks.push(check("lancaster", stage.report.passed, json!(stage.report)));
        for (k, p) in stage.probes.iter().enumerate() {
            checks.push(check("probe_edge", p.passed, json!({ "index": k, "probe": p })));
        }
        true
    } else {
        false
    };

    out.write(
        "checks.csv",
        &format!(
            "name,passed\n{}",
            checks.iter().map(|c| format!("{},{}\n", c.name, c.passed)).collect::<String>()
        ),
    )?;
    let passed = checks.iter().all(|c| c.passed);
    let body = json!({
        "essential_bild": poly.sorted_vertices(),
        "essential_upper": essential_upper(&model)?.sorted_vertices(),
        "lancaster_run": lancaster,
        "checks": checks,
    });
    Ok((body, passed))
}
