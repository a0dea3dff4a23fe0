use lgi_core::jordan::{self, ExtractionVerdict};
use lgi_core::povmopt::{self, OptimizerConfig};
use lgi_core::qcore::ComplexMatrix;
use lgi_core::robustness::{self, Side};
use lgi_core::seqstats::{self, CorrelationReport};
use lgi_core::QUANTUM_MAX_K4;
use serde::Serialize;

use crate::output::{csv, to_json};
use crate::schema::{self, InputFile};
use crate::{CertifyArgs, CliError, EvaluateArgs, IsometryArgs, OptimizeArgs, RobustnessArgs, SideArg};

pub struct Output {
    pub text: String,
    pub code: u8,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, code: 0 }
    }

    fn verdict(text: String, pass: bool) -> Self {
        Self {
            text,
            code: if pass { 0 } else { 1 },
        }
    }
}

fn line(mut s: String) -> String {
    s.push('\n');
    s
}

fn report_csv(r: &CorrelationReport) -> String {
    let mut out = String::from("quantity,value\n");
    out += &format!("k4,{}\n", csv(r.k4));
    for i in 0..2 {
        for j in 0..2 {
            out += &format!("C{}{},{}\n", i + 1, j + 1, csv(r.correlators[i][j]));
        }
    }
    out += &format!("nsitDeviation,{}\n", csv(r.nsit_deviation));
    out += &format!("predictabilityDeviation,{}\n", csv(r.predictability_deviation));
    out
}

pub fn evaluate(args: &EvaluateArgs) -> Result<Output, CliError> {
    let text = schema::read(&args.path)?;
    let scenario = schema::parse_scenario(&args.path, &text)?.build()?;
    let report = seqstats::full_report(&scenario).map_err(CliError::invariant)?;
    Ok(Output::ok(if args.csv {
        report_csv(&report)
    } else {
        line(to_json(&report))
    }))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CertifyVerdict {
    source: &'static str,
    k4: f64,
    nsit_deviation: f64,
    fidelity_lower_bound: f64,
    epsilon: f64,
    self_test_pass: bool,
    exit_code: u8,
}

pub fn certify(args: &CertifyArgs) -> Result<Output, CliError> {
    if !(args.epsilon >= 0.0) {
        return Err(CliError::Usage(format!("--epsilon {} must be non-negative", args.epsilon)));
    }
    let text = schema::read(&args.path)?;
    let (source, report) = match schema::parse_any(&args.path, &text)? {
        InputFile::Scenario(f) => ("scenario", seqstats::full_report(&f.build()?).map_err(CliError::invariant)?),
        InputFile::Statistics(f) => ("statistics", f.build()?.report()),
    };
    let fidelity_lower_bound = robustness::fidelity_lower_bound(report.k4).map_err(CliError::invariant)?;
    let pass = report.k4 >= QUANTUM_MAX_K4 - args.epsilon && report.nsit_deviation <= args.epsilon;
    let verdict = CertifyVerdict {
        source,
        k4: report.k4,
        nsit_deviation: report.nsit_deviation,
        fidelity_lower_bound,
        epsilon: args.epsilon,
        self_test_pass: pass,
        exit_code: if pass { 0 } else { 1 },
    };
    Ok(Output::verdict(line(to_json(&verdict)), pass))
}

pub fn optimize_povm(args: &OptimizeArgs) -> Result<Output, CliError> {
    let config = OptimizerConfig {
        grid_resolution: args.grid as usize,
        seed: args.seed,
        sharpness_cap: args.cap_sharpness,
        bias_floor: args.bias_floor,
        full_sphere: args.full_sphere,
        ..OptimizerConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = povmopt::maximize_k4(&config).map_err(CliError::invariant)?;
    Ok(Output::ok(line(to_json(&result))))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct InequalityOutput {
    #[serde(flatten)]
    report: robustness::InequalityReport,
    tolerance: f64,
    inequality_holds: bool,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    largest_certified_slope: Option<f64>,
}

#[derive(Serialize)]
struct RobustnessOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<robustness::CurvePoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inequality: Option<InequalityOutput>,
}

pub fn robustness(args: &RobustnessArgs) -> Result<Output, CliError> {
    if args.curve_points.is_none() && !args.check_inequality {
        return Err(CliError::Usage("nothing to do: pass --curve-points and/or --check-inequality".into()));
    }
    let slope = args.slope.unwrap_or(robustness::OPTIMAL_SLOPE);
    if !(slope >= 0.0 && slope.is_finite()) || !(args.tolerance >= 0.0) {
        return Err(CliError::Usage("--slope and --tolerance must be non-negative".into()));
    }
    let side = match args.side {
        SideArg::Alice => Side::Alice,
        SideArg::Bob => Side::Bob,
    };
    let curve = args
        .curve_points
        .map(|n| robustness::dephasing_curve(n as usize))
        .transpose()
        .map_err(CliError::invariant)?;
    let inequality = if args.check_inequality {
        let report =
            robustness::check_operator_inequality(side, slope, args.theta_grid as usize).map_err(CliError::invariant)?;
        let largest = if args.largest_slope {
            Some(
                robustness::largest_certified_slope(side, args.theta_grid as usize, 4.0, args.tolerance)
                    .map_err(CliError::invariant)?,
            )
        } else {
            None
        };
        Some(InequalityOutput {
            report,
            tolerance: args.tolerance,
            inequality_holds: report.inequality_holds(args.tolerance),
            pass: report.certified(args.tolerance),
            largest_certified_slope: largest,
        })
    } else {
        None
    };
    let pass = inequality.as_ref().map_or(true, |i| i.pass);

    if args.json {
        return Ok(Output::verdict(line(to_json(&RobustnessOutput { curve, inequality })), pass));
    }
    let mut out = String::new();
    if let Some(curve) = &curve {
        out += "phi,k4,fidelity,bound\n";
        for p in curve {
            out += &format!("{},{},{},{}\n", csv(p.phi), csv(p.k4), csv(p.fidelity), csv(p.bound));
        }
    }
    if let Some(i) = &inequality {
        if curve.is_some() {
            out.push('\n');
        }
        let r = &i.report;
        out += "quantity,value\n";
        out += &format!("slope,{}\n", csv(r.s));
        out += &format!("minEigenvalue,{}\n", csv(r.min_eigenvalue));
        out += &format!("argminTheta,{}\n", csv(r.argmin_theta));
        out += &format!("minAverageMu,{}\n", csv(r.min_average_mu));
        out += &format!("argminAverageMuTheta,{}\n", csv(r.argmin_average_mu_theta));
        if let Some(s) = i.largest_certified_slope {
            out += &format!("largestCertifiedSlope,{}\n", csv(s));
        }
        out += &format!("result,{}\n", if i.pass { "pass" } else { "fail" });
    }
    Ok(Output::verdict(out, pass))
}

fn rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    let d = m.dim();
    (0..d).map(|r| (0..d).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VerdictOutput {
    i: usize,
    a: usize,
    j: usize,
    residual_norm: f64,
    junk_state: Vec<Vec<[f64; 2]>>,
    pass: bool,
}

impl From<&ExtractionVerdict> for VerdictOutput {
    fn from(v: &ExtractionVerdict) -> Self {
        Self {
            i: v.i,
            a: v.a,
            j: v.j,
            residual_norm: v.residual_norm,
            junk_state: rows(v.junk_state.matrix()),
            pass: v.pass,
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct IsometryOutput {
    blocks: usize,
    weights: Vec<f64>,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbation: Option<f64>,
    verdicts: Vec<VerdictOutput>,
    all_pass: bool,
}

pub fn isometry_check(args: &IsometryArgs) -> Result<Output, CliError> {
    let blocks = match (args.blocks, &args.weights) {
        (Some(n), Some(w)) if n != w.len() => {
            return Err(CliError::Usage(format!("--blocks {n} but {} weights", w.len())));
        }
        (Some(n), _) => n,
        (None, Some(w)) => w.len(),
        (None, None) => 1,
    };
    if blocks == 0 {
        return Err(CliError::Usage("need at least one block".into()));
    }
    let weights = args.weights.clone().unwrap_or_else(|| vec![1.0 / blocks as f64; blocks]);
    jordan::validate_weights(&weights).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(args.tolerance >= 0.0) {
        return Err(CliError::Usage(format!("--tolerance {} must be non-negative", args.tolerance)));
    }
    let mut bs = jordan::ideal_block_scenario(blocks, &weights).map_err(CliError::invariant)?;
    if let Some(angle) = args.perturb {
        for m in 0..blocks {
            bs = bs.with_rotated_bob_block(m, angle).map_err(CliError::invariant)?;
        }
    }
    let verdicts = jordan::verify_all_extractions(&bs, args.tolerance).map_err(CliError::invariant)?;
    let all_pass = verdicts.iter().all(|v| v.pass);
    let out = IsometryOutput {
        blocks,
        weights,
        tolerance: args.tolerance,
        perturbation: args.perturb,
        verdicts: verdicts.iter().map(VerdictOutput::from).collect(),
        all_pass,
    };
    Ok(Output::verdict(line(to_json(&out)), all_pass))
}

