//! Experiment configuration, the end-to-end pipeline, reports, and the
//! dense spectral oracle.
//!
//! A configuration describes the partition, the finite element degree, the
//! coefficient field, the scaling choice (M1 multiplicity / M2 deluxe), the
//! eigenvalue tolerance Theta (explicit or by the rule
//! `1 + min(ln n, ln(beta n))`), the right-hand side, and PCG controls.
//! `build_pipeline` assembles everything bottom-up; `run_experiment` solves
//! and reports; `run_oracle` computes the dense spectrum of the
//! preconditioned operator on desk-scale problems.

use crate::adaptivity::{
    build_edge_adaptivity, AdaptivityError, EdgeAdaptivity, ScalingKind, ScalingPair, SplitRule,
};
use crate::assembly::{assemble_load, assemble_local, AssemblyError, RhsField};
use crate::bddc::{build_layout, build_operator, preconditioned_spectrum, BddcError, BddcOperator};
use crate::coefficients::{CoefficientError, CoefficientField};
use crate::geometry::{
    build_conforming_partition, detect_interfaces, fe_space, load_partition, triangulate,
    GeometryError, Interface, SubdomainPartition,
};
use crate::krylov::{lanczos_estimates, pcg};
use crate::linalg::{Matrix, Vector};
use crate::mortar::{assemble_coupling, build_multiplier_space, MortarError, MultiplierSpace};
use crate::schur::{
    edge_schur, schur_rhs, subdomain_schur, EdgeSchur, MultiplierNumbering, SchurError,
    SubdomainSchur,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Size guard for the dense oracle.
pub const ORACLE_DIM_LIMIT: usize = 2000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("coefficients: {0}")]
    Coefficient(#[from] CoefficientError),
    #[error("assembly: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("mortar: {0}")]
    Mortar(#[from] MortarError),
    #[error("schur: {0}")]
    Schur(#[from] SchurError),
    #[error("adaptivity: {0}")]
    Adaptivity(#[from] AdaptivityError),
    #[error("bddc: {0}")]
    Bddc(#[from] BddcError),
    #[error("oracle requires at most {limit} multiplier dofs, got {dim}")]
    OracleTooLarge { dim: usize, limit: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PartitionSpec {
    /// k x k squares, mesh counts alternating n / beta*n as a checkerboard.
    Conforming { k: usize, n: usize, beta: f64 },
    /// Partition file (JSON records), optionally scaling every mesh count.
    File {
        path: String,
        #[serde(default = "default_mesh_scale")]
        mesh_scale: usize,
    },
}

fn default_mesh_scale() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingSpec {
    /// Multiplicity scaling (I/2 on both sides).
    M1,
    /// Deluxe scaling from the edge Schur complements.
    M2,
}

impl ScalingSpec {
    pub fn kind(self) -> ScalingKind {
        match self {
            ScalingSpec::M1 => ScalingKind::Multiplicity,
            ScalingSpec::M2 => ScalingKind::Deluxe,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ThetaSpec {
    /// `1 + min(ln n, ln(beta n))`; n and beta default to the conforming
    /// partition parameters.
    Rule {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Fixed { value: f64 },
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Rule {
            n: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoarseSpaceSpec {
    #[default]
    Adaptive,
    /// Force every transformed dof primal (exact coarse solve).
    AllPrimal,
    /// Force an empty coarse space.
    AllDual,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcgSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub max_iterations: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_maxit() -> usize {
    500
}

impl Default for PcgSpec {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iterations: default_maxit(),
        }
    }
}

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub partition: PartitionSpec,
    pub degree: usize,
    pub coefficient: CoefficientField,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub scaling: ScalingSpec,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub rhs: RhsField,
    #[serde(default)]
    pub pcg: PcgSpec,
    #[serde(default)]
    pub coarse_space: CoarseSpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Load from a file; relative partition paths resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_json(&text)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }
}

/// `Theta = 1 + min(ln n, ln(beta n))` (natural logarithm).
pub fn theta_rule(n: usize, beta: f64) -> Result<f64, HarnessError> {
    if n < 2 {
        return Err(HarnessError::Config(format!(
            "theta rule requires n >= 2, got {n}"
        )));
    }
    let bn = beta * n as f64;
    if bn < 1.0 - 1e-9 {
        return Err(HarnessError::Config(format!(
            "theta rule requires beta * n >= 1, got {bn}"
        )));
    }
    Ok(1.0 + (n as f64).ln().min(bn.ln()))
}

/// Everything the solver needs, assembled once per experiment.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub partition: SubdomainPartition,
    pub interfaces: Vec<Interface>,
    pub spaces: Vec<crate::geometry::FESpace>,
    pub multiplier_spaces: Vec<MultiplierSpace>,
    pub couplings: Vec<crate::mortar::MortarCoupling>,
    pub numbering: MultiplierNumbering,
    pub schurs: Vec<SubdomainSchur>,
    /// Edge Schur pairs `[side i, side j]` per interface.
    pub edge_schurs: Vec<[EdgeSchur; 2]>,
    pub scalings: Vec<ScalingPair>,
    pub adapt: Vec<EdgeAdaptivity>,
    pub theta: f64,
    pub operator: BddcOperator,
    /// Reduced right-hand side in the original multiplier basis.
    pub g: Vector,
    /// Reduced right-hand side in the transformed basis.
    pub g_hat: Vector,
}

pub fn build_pipeline(
    config: &ExperimentConfig,
    base_dir: &Path,
) -> Result<Pipeline, HarnessError> {
    if config.degree != 1 && config.degree != 2 {
        return Err(HarnessError::Config(format!(
            "degree must be 1 or 2, got {}",
            config.degree
        )));
    }
    if config.epsilon < 0.0 {
        return Err(HarnessError::Config("epsilon must be nonnegative".into()));
    }
    config.coefficient.validate()?;

    let partition = match &config.partition {
        PartitionSpec::Conforming { k, n, beta } => build_conforming_partition(*k, *n, *beta)?,
        PartitionSpec::File { path, mesh_scale } => {
            if *mesh_scale == 0 {
                return Err(HarnessError::Config("mesh_scale must be positive".into()));
            }
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full)?;
            let mut p = load_partition(&text)?;
            for m in &mut p.mesh_counts {
                *m *= mesh_scale;
            }
            p
        }
    };
    let interfaces = detect_interfaces(&partition)?;
    if interfaces.is_empty() {
        return Err(HarnessError::Config(
            "partition has no interfaces; nothing to reduce".into(),
        ));
    }

    let theta = match &config.theta {
        ThetaSpec::Fixed { value } => {
            if *value < 1.0 {
                return Err(HarnessError::Config(format!(
                    "theta must be at least 1, got {value}"
                )));
            }
            *value
        }
        ThetaSpec::Rule { n, beta } => {
            let (dn, db) = match &config.partition {
                PartitionSpec::Conforming { n, beta, .. } => (Some(*n), Some(*beta)),
                PartitionSpec::File { .. } => (None, None),
            };
            let n = n.or(dn).ok_or_else(|| {
                HarnessError::Config(
                    "theta rule needs n (explicit for file partitions)".into(),
                )
            })?;
            let beta = beta.or(db).ok_or_else(|| {
                HarnessError::Config(
                    "theta rule needs beta (explicit for file partitions)".into(),
                )
            })?;
            theta_rule(n, beta)?
        }
    };

    // Per-subdomain geometry and spaces.
    let n_sub = partition.len();
    let mut tris = Vec::with_capacity(n_sub);
    let mut spaces = Vec::with_capacity(n_sub);
    for i in 0..n_sub {
        let tri = triangulate(&partition.rects[i], partition.mesh_counts[i], i);
        spaces.push(fe_space(&tri, &partition.rects[i], config.degree)?);
        tris.push(tri);
    }

    // Multiplier spaces and coupling blocks.
    let mut multiplier_spaces = Vec::with_capacity(interfaces.len());
    let mut couplings = Vec::with_capacity(interfaces.len());
    for iface in &interfaces {
        let ms = build_multiplier_space(iface, config.degree)?;
        let coupling = assemble_coupling(
            iface,
            [&spaces[iface.sub_i], &spaces[iface.sub_j]],
            &ms,
        )?;
        multiplier_spaces.push(ms);
        couplings.push(coupling);
    }
    let numbering =
        MultiplierNumbering::new(&multiplier_spaces.iter().map(|m| m.dim).collect::<Vec<_>>());

    // Local assembly and subdomain reductions.
    let mut reductions = Vec::with_capacity(n_sub);
    for i in 0..n_sub {
        let local = assemble_local(
            &spaces[i],
            &tris[i],
            &partition.rects[i],
            &config.coefficient,
            config.epsilon,
        )?;
        let load = assemble_load(&spaces[i], &tris[i], &config.rhs);
        let blocks: Vec<(usize, &crate::mortar::CouplingBlock)> = interfaces
            .iter()
            .filter_map(|iface| {
                if iface.sub_i == i {
                    Some((iface.id, &couplings[iface.id].blocks[0]))
                } else if iface.sub_j == i {
                    Some((iface.id, &couplings[iface.id].blocks[1]))
                } else {
                    None
                }
            })
            .collect();
        reductions.push(subdomain_schur(local, &spaces[i], &blocks, &load)?);
    }
    let g = schur_rhs(&reductions, &numbering);
    let schurs: Vec<SubdomainSchur> = reductions.into_iter().map(|r| r.schur).collect();

    // Edge Schur complements, scalings, eigenproblems, splits.
    let rule = match config.coarse_space {
        CoarseSpaceSpec::Adaptive => SplitRule::Threshold(theta),
        CoarseSpaceSpec::AllPrimal => SplitRule::AllPrimal,
        CoarseSpaceSpec::AllDual => SplitRule::AllDual,
    };
    let mut edge_schurs = Vec::with_capacity(interfaces.len());
    let mut scalings = Vec::with_capacity(interfaces.len());
    let mut adapt = Vec::with_capacity(interfaces.len());
    for iface in &interfaces {
        let es_i = edge_schur(&schurs[iface.sub_i], iface.id)?;
        let es_j = edge_schur(&schurs[iface.sub_j], iface.id)?;
        let (edge_adapt, scaling) = build_edge_adaptivity(
            iface.id,
            &es_i.s,
            &es_j.s,
            &es_i.sbar,
            &es_j.sbar,
            config.scaling.kind(),
            rule,
        )?;
        edge_schurs.push([es_i, es_j]);
        scalings.push(scaling);
        adapt.push(edge_adapt);
    }

    let pairs: Vec<(usize, usize)> = interfaces.iter().map(|f| (f.sub_i, f.sub_j)).collect();
    let layout = build_layout(n_sub, &pairs, &adapt);
    let operator = build_operator(&schurs, &adapt, layout)?;

    // Transform the right-hand side per interface block.
    let mut g_hat = Vector::zeros(numbering.total);
    for (k, ms) in multiplier_spaces.iter().enumerate() {
        let r = numbering.range(k);
        let block = g.rows(r.start, ms.dim);
        let transformed = adapt[k].t.transpose() * block;
        g_hat.rows_mut(r.start, ms.dim).copy_from(&transformed);
    }

    Ok(Pipeline {
        config: config.clone(),
        partition,
        interfaces,
        spaces,
        multiplier_spaces,
        couplings,
        numbering,
        schurs,
        edge_schurs,
        scalings,
        adapt,
        theta,
        operator,
        g,
        g_hat,
    })
}

/// Fixed conventions surfaced in every report so deviations from published
/// counts are attributable.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Conventions {
    pub log_base: &'static str,
    pub prng: &'static str,
    pub stopping: &'static str,
    pub quadrature: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            log_base: "natural",
            prng: "chacha8 keyed by (seed, subdomain, element)",
            stopping: "||M^-1 r||_2 <= tol * ||M^-1 r0||_2",
            quadrature: "exact fixed rules (degree 2s)",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeReport {
    pub interface: usize,
    pub n_k: usize,
    pub n_delta: usize,
    pub n_pi: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub deflated: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub conventions: Conventions,
    pub scaling: ScalingSpec,
    pub theta: f64,
    pub dim_multipliers: usize,
    pub iterations: usize,
    pub converged: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub pnum: usize,
    pub ppnum: f64,
    pub residuals: Vec<f64>,
    pub edges: Vec<EdgeReport>,
    pub wall_ms: f64,
}

impl ExperimentReport {
    /// One-row CSV with a conventions comment header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# log_base={}; prng={}; stopping={}; quadrature={}\n",
            self.conventions.log_base,
            self.conventions.prng,
            self.conventions.stopping,
            self.conventions.quadrature
        ));
        out.push_str("scaling,iter,lambda_min,lambda_max,kappa,pnum,ppnum,theta,c\n");
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6}\n",
            match self.scaling {
                ScalingSpec::M1 => "m1",
                ScalingSpec::M2 => "m2",
            },
            self.iterations,
            self.lambda_min,
            self.lambda_max,
            self.kappa,
            self.pnum,
            self.ppnum,
            self.theta,
            self.kappa / self.theta,
        ));
        out
    }

    /// Per-edge diagnostics CSV.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("interface,n_k,n_delta,n_pi,lambda_min,lambda_max,deflated\n");
        for e in &self.edges {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{}\n",
                e.interface, e.n_k, e.n_delta, e.n_pi, e.lambda_min, e.lambda_max, e.deflated
            ));
        }
        out
    }
}

/// Solve the reduced system with PCG under the BDDC preconditioner.
/// Returns the report and the multiplier solution in the original basis.
pub fn run_experiment(pipeline: &Pipeline) -> (ExperimentReport, Vector) {
    let start = std::time::Instant::now();
    let op = &pipeline.operator;
    let outcome = pcg(
        &|v| op.apply_schur(v),
        &|r| op.apply(r),
        &pipeline.g_hat,
        pipeline.config.pcg.tol,
        pipeline.config.pcg.max_iterations,
    );
    let (lambda_min, lambda_max) = if outcome.alphas.is_empty() {
        (1.0, 1.0)
    } else {
        lanczos_estimates(&outcome.alphas, &outcome.betas)
    };
    // Back to the original multiplier basis.
    let mut solution = Vector::zeros(pipeline.numbering.total);
    for (k, ms) in pipeline.multiplier_spaces.iter().enumerate() {
        let r = pipeline.numbering.range(k);
        let block = outcome.solution.rows(r.start, ms.dim);
        let original = &pipeline.adapt[k].t * block;
        solution.rows_mut(r.start, ms.dim).copy_from(&original);
    }
    let edges = pipeline
        .adapt
        .iter()
        .map(|a| EdgeReport {
            interface: a.interface_id,
            n_k: a.dim,
            n_delta: a.n_delta,
            n_pi: a.n_pi,
            lambda_min: a.eigenvalues.first().copied().unwrap_or(f64::NAN),
            lambda_max: a.eigenvalues.last().copied().unwrap_or(f64::NAN),
            deflated: a.deflated,
        })
        .collect();
    let report = ExperimentReport {
        conventions: Conventions::default(),
        scaling: pipeline.config.scaling,
        theta: pipeline.theta,
        dim_multipliers: pipeline.numbering.total,
        iterations: outcome.iterations,
        converged: outcome.converged,
        lambda_min,
        lambda_max,
        kappa: lambda_max / lambda_min,
        pnum: op.layout.pnum(),
        ppnum: op.layout.ppnum(),
        residuals: outcome.residuals,
        edges,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    (report, solution)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub dim: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    /// CG estimates for comparison (same pipeline, fresh solve).
    pub cg_lambda_min: f64,
    pub cg_lambda_max: f64,
    pub cg_kappa: f64,
    pub spectrum: Vec<f64>,
}

/// Dense spectrum of the preconditioned operator; desk-scale only.
pub fn run_oracle(pipeline: &Pipeline) -> Result<OracleReport, HarnessError> {
    let dim = pipeline.operator.layout.dim_hat;
    if dim > ORACLE_DIM_LIMIT {
        return Err(HarnessError::OracleTooLarge {
            dim,
            limit: ORACLE_DIM_LIMIT,
        });
    }
    let spectrum = preconditioned_spectrum(&pipeline.operator)
        .map_err(|e| HarnessError::Config(format!("oracle factorization failed: {e}")))?;
    let lambda_min = spectrum[0];
    let lambda_max = spectrum[spectrum.len() - 1];
    let (report, _) = run_experiment(pipeline);
    Ok(OracleReport {
        dim,
        lambda_min,
        lambda_max,
        kappa: lambda_max / lambda_min,
        cg_lambda_min: report.lambda_min,
        cg_lambda_max: report.lambda_max,
        cg_kappa: report.kappa,
        spectrum,
    })
}

/// Dense row-major decimal text format used by the debug dumps:
/// `rows cols` on the first line, then one row per line.
pub fn matrix_to_text(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Write the per-subdomain and per-edge Schur matrices as text files.
pub fn dump_schur_matrices(pipeline: &Pipeline, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    for ss in &pipeline.schurs {
        std::fs::write(
            dir.join(format!("subdomain_{:03}.txt", ss.subdomain_id)),
            matrix_to_text(&ss.matrix),
        )?;
    }
    for (k, pair) in pipeline.edge_schurs.iter().enumerate() {
        for (side, es) in pair.iter().enumerate() {
            let tag = if side == 0 { "i" } else { "j" };
            std::fs::write(
                dir.join(format!("edge_{k:03}_side_{tag}_s.txt")),
                matrix_to_text(&es.s),
            )?;
            std::fs::write(
                dir.join(format!("edge_{k:03}_side_{tag}_sbar.txt")),
                matrix_to_text(&es.sbar),
            )?;
        }
    }
    Ok(())
}

/// Write the standard report files into a directory.
pub fn write_reports(
    report: &ExperimentReport,
    oracle: Option<&OracleReport>,
    dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), report.to_csv())?;
    std::fs::write(dir.join("edges.csv"), report.edges_csv())?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    if let Some(o) = oracle {
        std::fs::write(dir.join("oracle.json"), serde_json::to_string_pretty(o)?)?;
    }
    Ok(())
}
