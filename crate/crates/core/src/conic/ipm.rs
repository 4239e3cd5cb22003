// Infeasible primal-dual path following on the realified problem, HKM
// direction with a Mehrotra predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{
    realify, unrealify, BlockMatrix, BlockSpec, Residuals, SdpProblem, SdpSolution, SolveOptions,
    SolveStatus,
};
use crate::operators::c;

type RMatrix = DMatrix<f64>;

const STEP_FRACTION: f64 = 0.98;
const MIN_STEP: f64 = 1e-10;
const REGULARIZATION: f64 = 1e-13;
/// A run that stops short of the tolerances still reports its best iterate
/// as [`SolveStatus::Inaccurate`] when that iterate is within this factor.
const INACCURATE_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug)]
enum Cone {
    Sdp(usize),
    Lp(usize),
}

impl Cone {
    fn order(&self) -> usize {
        match self {
            Cone::Sdp(n) | Cone::Lp(n) => *n,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Cone { index: usize, complex: bool },
    Free { offset: usize, len: usize },
}

#[derive(Clone, Debug)]
enum Part {
    Sdp(RMatrix),
    Lp(DVector<f64>),
}

impl Part {
    fn zeros(cone: Cone) -> Part {
        match cone {
            Cone::Sdp(n) => Part::Sdp(RMatrix::zeros(n, n)),
            Cone::Lp(n) => Part::Lp(DVector::zeros(n)),
        }
    }

    fn identity(cone: Cone, s: f64) -> Part {
        match cone {
            Cone::Sdp(n) => Part::Sdp(RMatrix::identity(n, n) * s),
            Cone::Lp(n) => Part::Lp(DVector::from_element(n, s)),
        }
    }

    fn dot(&self, other: &Part) -> f64 {
        match (self, other) {
            (Part::Sdp(a), Part::Sdp(b)) => a.dot(b),
            (Part::Lp(a), Part::Lp(b)) => a.dot(b),
            _ => unreachable!("cone kinds fixed at realification"),
        }
    }

    fn axpy(&mut self, alpha: f64, x: &Part) {
        match (self, x) {
            (Part::Sdp(a), Part::Sdp(b)) => *a += b * alpha,
            (Part::Lp(a), Part::Lp(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!("cone kinds fixed at realification"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Part::Sdp(a) => a.norm_squared(),
            Part::Lp(a) => a.norm_squared(),
        }
    }
}

struct Realified {
    cones: Vec<Cone>,
    slots: Vec<Slot>,
    n_free: usize,
    /// Per cone: (constraint index, coefficient).
    cone_rows: Vec<Vec<(usize, Part)>>,
    free_rows: RMatrix,
    b: DVector<f64>,
    c: Vec<Part>,
    c_free: DVector<f64>,
}

fn realify_coeff(slot: Slot, m: &BlockMatrix) -> Part {
    match (slot, m) {
        (Slot::Cone { complex: true, .. }, BlockMatrix::Complex(a)) => Part::Sdp(realify(a) * 0.5),
        (Slot::Cone { complex: true, .. }, BlockMatrix::Real(a)) => {
            Part::Sdp(realify(&a.map(|v| c(v, 0.0))) * 0.5)
        }
        (Slot::Cone { complex: false, .. }, BlockMatrix::Real(a)) => Part::Sdp(a.clone()),
        (Slot::Cone { .. }, BlockMatrix::Vector(v)) => Part::Lp(DVector::from_column_slice(v)),
        _ => unreachable!("validated problem"),
    }
}

fn realify_value(slot: Slot, m: &BlockMatrix) -> Part {
    match (slot, m) {
        (Slot::Cone { complex: true, .. }, BlockMatrix::Complex(a)) => Part::Sdp(realify(a)),
        (Slot::Cone { complex: true, .. }, BlockMatrix::Real(a)) => {
            Part::Sdp(realify(&a.map(|v| c(v, 0.0))))
        }
        _ => realify_coeff(slot, m),
    }
}

impl Realified {
    fn new(p: &SdpProblem) -> Self {
        let mut cones = Vec::new();
        let mut slots = Vec::new();
        let mut n_free = 0;
        for spec in &p.blocks {
            let slot = match *spec {
                BlockSpec::Symmetric(n) => {
                    cones.push(Cone::Sdp(n));
                    Slot::Cone {
                        index: cones.len() - 1,
                        complex: false,
                    }
                }
                BlockSpec::Hermitian(n) => {
                    cones.push(Cone::Sdp(2 * n));
                    Slot::Cone {
                        index: cones.len() - 1,
                        complex: true,
                    }
                }
                BlockSpec::Nonnegative(n) => {
                    cones.push(Cone::Lp(n));
                    Slot::Cone {
                        index: cones.len() - 1,
                        complex: false,
                    }
                }
                BlockSpec::Free(n) => {
                    n_free += n;
                    Slot::Free {
                        offset: n_free - n,
                        len: n,
                    }
                }
            };
            slots.push(slot);
        }
        let m = p.constraints.len();
        let mut cone_rows: Vec<Vec<(usize, Part)>> = vec![Vec::new(); cones.len()];
        let mut free_rows = RMatrix::zeros(m, n_free);
        for (i, con) in p.constraints.iter().enumerate() {
            for (b, coeff) in &con.functional.terms {
                match slots[*b] {
                    Slot::Cone { index, .. } => {
                        let part = realify_coeff(slots[*b], coeff);
                        // Merge repeated terms on the same cone.
                        if let Some((_, existing)) =
                            cone_rows[index].iter_mut().find(|(r, _)| *r == i)
                        {
                            existing.axpy(1.0, &part);
                        } else {
                            cone_rows[index].push((i, part));
                        }
                    }
                    Slot::Free { offset, .. } => {
                        if let BlockMatrix::Vector(v) = coeff {
                            for (k, a) in v.iter().enumerate() {
                                free_rows[(i, offset + k)] += a;
                            }
                        }
                    }
                }
            }
        }
        let mut cvec: Vec<Part> = cones.iter().map(|&k| Part::zeros(k)).collect();
        let mut c_free = DVector::zeros(n_free);
        for (b, coeff) in &p.objective.terms {
            match slots[*b] {
                Slot::Cone { index, .. } => cvec[index].axpy(1.0, &realify_coeff(slots[*b], coeff)),
                Slot::Free { offset, .. } => {
                    if let BlockMatrix::Vector(v) = coeff {
                        for (k, a) in v.iter().enumerate() {
                            c_free[offset + k] += a;
                        }
                    }
                }
            }
        }
        let b = DVector::from_iterator(m, p.constraints.iter().map(|con| con.rhs));
        Self {
            cones,
            slots,
            n_free,
            cone_rows,
            free_rows,
            b,
            c: cvec,
            c_free,
        }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply_a(&self, x: &[Part], xf: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.free_rows * xf;
        for (k, rows) in self.cone_rows.iter().enumerate() {
            for (i, a) in rows {
                out[*i] += a.dot(&x[k]);
            }
        }
        out
    }

    fn apply_a_cones(&self, x: &[Part]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (k, rows) in self.cone_rows.iter().enumerate() {
            for (i, a) in rows {
                out[*i] += a.dot(&x[k]);
            }
        }
        out
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<Part> {
        let mut out: Vec<Part> = self.cones.iter().map(|&k| Part::zeros(k)).collect();
        for (k, rows) in self.cone_rows.iter().enumerate() {
            for (i, a) in rows {
                if y[*i] != 0.0 {
                    out[k].axpy(y[*i], a);
                }
            }
        }
        out
    }
}

fn sym(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

/// Largest `α` with `x + α·dx` in the cone, infinite when unbounded.
fn max_step(x: &Part, dx: &Part) -> Option<f64> {
    match (x, dx) {
        (Part::Sdp(xm), Part::Sdp(dm)) => {
            let chol = Cholesky::new(xm.clone())?;
            let l = chol.l();
            let linv = l.clone().try_inverse()?;
            let s = sym(&(&linv * dm * linv.transpose()));
            let min = SymmetricEigen::new(s).eigenvalues.min();
            Some(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
        }
        (Part::Lp(xv), Part::Lp(dv)) => Some(
            xv.iter()
                .zip(dv.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(x, d)| -x / d)
                .fold(f64::INFINITY, f64::min),
        ),
        _ => unreachable!("cone kinds fixed at realification"),
    }
}

struct Newton<'a> {
    prob: &'a Realified,
    x: &'a [Part],
    zinv: Vec<Part>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

struct Direction {
    dx: Vec<Part>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<Part>,
}

impl<'a> Newton<'a> {
    fn new(prob: &'a Realified, x: &'a [Part], z: &[Part]) -> Option<Self> {
        let m = prob.m();
        let nf = prob.n_free;
        let mut zinv = Vec::with_capacity(z.len());
        for zk in z {
            zinv.push(match zk {
                Part::Sdp(zm) => Part::Sdp(sym(&Cholesky::new(zm.clone())?.inverse())),
                Part::Lp(zv) => {
                    if zv.iter().any(|v| !(*v > 0.0)) {
                        return None;
                    }
                    Part::Lp(zv.map(|v| 1.0 / v))
                }
            });
        }
        let mut kkt = RMatrix::zeros(m + nf, m + nf);
        for (k, rows) in prob.cone_rows.iter().enumerate() {
            match (&x[k], &zinv[k]) {
                (Part::Sdp(xm), Part::Sdp(zi)) => {
                    for (j, aj) in rows {
                        let Part::Sdp(ajm) = aj else { unreachable!() };
                        let g = xm * ajm * zi;
                        for (i, ai) in rows {
                            let Part::Sdp(aim) = ai else { unreachable!() };
                            kkt[(*i, *j)] += aim.dot(&g);
                        }
                    }
                }
                (Part::Lp(xv), Part::Lp(zi)) => {
                    let w = xv.component_mul(zi);
                    for (j, aj) in rows {
                        let Part::Lp(ajv) = aj else { unreachable!() };
                        let g = ajv.component_mul(&w);
                        for (i, ai) in rows {
                            let Part::Lp(aiv) = ai else { unreachable!() };
                            kkt[(*i, *j)] += aiv.dot(&g);
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        for i in 0..m {
            for f in 0..nf {
                kkt[(i, m + f)] = prob.free_rows[(i, f)];
                kkt[(m + f, i)] = prob.free_rows[(i, f)];
            }
        }
        if kkt.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let lu = kkt.clone().lu();
        if lu.is_invertible() {
            return Some(Self { prob, x, zinv, lu });
        }
        // Near the optimum of degenerate problems the Schur complement can
        // lose rank to rounding; a tiny proximal shift restores a pivot.
        let scale = (0..m)
            .map(|i| kkt[(i, i)].abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let delta = REGULARIZATION * scale;
        for i in 0..m {
            kkt[(i, i)] += delta;
        }
        for f in 0..nf {
            kkt[(m + f, m + f)] -= delta;
        }
        let lu = kkt.lu();
        lu.is_invertible().then_some(Self { prob, x, zinv, lu })
    }

    /// Solves for the direction whose complementarity target is
    /// `X·Z + dX·Z + X·dZ = G·Z`, given `G` per cone.
    fn direction(
        &self,
        g: &[Part],
        rp: &DVector<f64>,
        rd: &[Part],
        rf: &DVector<f64>,
    ) -> Option<Direction> {
        let prob = self.prob;
        let m = prob.m();
        // T = G − X − X·Rd·Z⁻¹
        let t: Vec<Part> = (0..prob.cones.len())
            .map(|k| match (&g[k], &self.x[k], &rd[k], &self.zinv[k]) {
                (Part::Sdp(gm), Part::Sdp(xm), Part::Sdp(rdm), Part::Sdp(zi)) => {
                    Part::Sdp(gm - xm - xm * rdm * zi)
                }
                (Part::Lp(gv), Part::Lp(xv), Part::Lp(rdv), Part::Lp(zi)) => {
                    Part::Lp(gv - xv - xv.component_mul(rdv).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        let h = rp - prob.apply_a_cones(&t);
        let mut rhs = DVector::zeros(m + prob.n_free);
        rhs.rows_mut(0, m).copy_from(&h);
        rhs.rows_mut(m, prob.n_free).copy_from(rf);
        let sol = self.lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dy = sol.rows(0, m).into_owned();
        let dxf = sol.rows(m, prob.n_free).into_owned();
        let aty = prob.apply_at(&dy);
        let mut dz = Vec::with_capacity(rd.len());
        let mut dx = Vec::with_capacity(rd.len());
        for k in 0..prob.cones.len() {
            let mut dzk = rd[k].clone();
            dzk.axpy(-1.0, &aty[k]);
            let dxk = match (&t[k], &self.x[k], &aty[k], &self.zinv[k]) {
                (Part::Sdp(tm), Part::Sdp(xm), Part::Sdp(am), Part::Sdp(zi)) => {
                    Part::Sdp(sym(&(tm + xm * am * zi)))
                }
                (Part::Lp(tv), Part::Lp(xv), Part::Lp(av), Part::Lp(zi)) => {
                    Part::Lp(tv + xv.component_mul(av).component_mul(zi))
                }
                _ => unreachable!(),
            };
            dz.push(dzk);
            dx.push(dxk);
        }
        Some(Direction { dx, dxf, dy, dz })
    }
}

fn step_lengths(x: &[Part], z: &[Part], dir: &Direction) -> Option<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for k in 0..x.len() {
        ap = ap.min(max_step(&x[k], &dir.dx[k])?);
        ad = ad.min(max_step(&z[k], &dir.dz[k])?);
    }
    Some((ap, ad))
}

#[derive(Clone)]
struct State {
    x: Vec<Part>,
    xf: DVector<f64>,
    y: DVector<f64>,
    z: Vec<Part>,
}

#[derive(Clone)]
struct Measures {
    rp: DVector<f64>,
    rd: Vec<Part>,
    rf: DVector<f64>,
    pobj: f64,
    dobj: f64,
    residuals: Residuals,
    mu: f64,
}

fn measure(prob: &Realified, s: &State, order: f64) -> Measures {
    let rp = &prob.b - prob.apply_a(&s.x, &s.xf);
    let aty = prob.apply_at(&s.y);
    let rd: Vec<Part> = (0..prob.cones.len())
        .map(|k| {
            let mut r = prob.c[k].clone();
            r.axpy(-1.0, &aty[k]);
            r.axpy(-1.0, &s.z[k]);
            r
        })
        .collect();
    let rf = &prob.c_free - prob.free_rows.transpose() * &s.y;
    let pobj = prob.c.iter().zip(&s.x).map(|(a, b)| a.dot(b)).sum::<f64>() + prob.c_free.dot(&s.xf);
    let dobj = prob.b.dot(&s.y);
    let b_norm = prob.b.norm();
    let c_norm =
        (prob.c.iter().map(Part::norm_sq).sum::<f64>() + prob.c_free.norm_squared()).sqrt();
    let rd_norm = (rd.iter().map(Part::norm_sq).sum::<f64>() + rf.norm_squared()).sqrt();
    let xz: f64 = s.x.iter().zip(&s.z).map(|(a, b)| a.dot(b)).sum();
    let denom = 1.0 + pobj.abs() + dobj.abs();
    Measures {
        residuals: Residuals {
            primal_infeasibility: rp.norm() / (1.0 + b_norm),
            dual_infeasibility: rd_norm / (1.0 + c_norm),
            relative_gap: (pobj - dobj).abs().max(xz.abs()) / denom,
        },
        rp,
        rd,
        rf,
        pobj,
        dobj,
        mu: xz / order,
    }
}

fn corrector_target(prob: &Realified, sigma_mu: f64, pred: &Direction, zinv: &[Part]) -> Vec<Part> {
    (0..prob.cones.len())
        .map(|k| match (&pred.dx[k], &pred.dz[k], &zinv[k]) {
            (Part::Sdp(dx), Part::Sdp(dz), Part::Sdp(zi)) => {
                let n = dx.nrows();
                Part::Sdp((RMatrix::identity(n, n) * sigma_mu - dx * dz) * zi)
            }
            (Part::Lp(dx), Part::Lp(dz), Part::Lp(zi)) => Part::Lp(
                (DVector::from_element(dx.len(), sigma_mu) - dx.component_mul(dz))
                    .component_mul(zi),
            ),
            _ => unreachable!(),
        })
        .collect()
}

fn centering_target(prob: &Realified, mu: f64, zinv: &[Part]) -> Vec<Part> {
    (0..prob.cones.len())
        .map(|k| match &zinv[k] {
            Part::Sdp(zi) => Part::Sdp(zi * mu),
            Part::Lp(zi) => Part::Lp(zi * mu),
        })
        .collect()
}

fn to_user(prob: &Realified, p: &SdpProblem, s: &State) -> (Vec<BlockMatrix>, Vec<BlockMatrix>) {
    let mut blocks = Vec::with_capacity(p.blocks.len());
    let mut slacks = Vec::with_capacity(p.blocks.len());
    for (spec, slot) in p.blocks.iter().zip(&prob.slots) {
        match *slot {
            Slot::Cone { index, complex } => match (&s.x[index], &s.z[index]) {
                (Part::Sdp(x), Part::Sdp(z)) if complex => {
                    blocks.push(BlockMatrix::Complex(unrealify(x)));
                    // Realified coefficients carry a factor ½, so the
                    // user-level slack is twice the projected one.
                    slacks.push(BlockMatrix::Complex(unrealify(z).map(|v| v * 2.0)));
                }
                (Part::Sdp(x), Part::Sdp(z)) => {
                    blocks.push(BlockMatrix::Real(x.clone()));
                    slacks.push(BlockMatrix::Real(z.clone()));
                }
                (Part::Lp(x), Part::Lp(z)) => {
                    blocks.push(BlockMatrix::Vector(x.iter().copied().collect()));
                    slacks.push(BlockMatrix::Vector(z.iter().copied().collect()));
                }
                _ => unreachable!(),
            },
            Slot::Free { offset, len } => {
                blocks.push(BlockMatrix::Vector(
                    s.xf.rows(offset, len).iter().copied().collect(),
                ));
                slacks.push(BlockMatrix::zeros_like(*spec));
            }
        }
    }
    (blocks, slacks)
}

pub(super) fn solve_validated(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let prob = Realified::new(p);
    let x0 = p
        .interior
        .as_ref()
        .expect("validated problem has an interior point");
    let mut x = Vec::with_capacity(prob.cones.len());
    let mut xf = DVector::zeros(prob.n_free);
    for (slot, value) in prob.slots.iter().zip(x0) {
        match *slot {
            Slot::Cone { .. } => x.push(realify_value(*slot, value)),
            Slot::Free { offset, len } => {
                if let BlockMatrix::Vector(v) = value {
                    xf.rows_mut(offset, len).copy_from_slice(v);
                }
            }
        }
    }
    let order: f64 = prob.cones.iter().map(Cone::order).sum::<usize>().max(1) as f64;
    let c_scale =
        (prob.c.iter().map(Part::norm_sq).sum::<f64>() + prob.c_free.norm_squared()).sqrt();
    let x_scale = x.iter().map(|p| p.norm_sq()).sum::<f64>().sqrt();
    let eta = (1.0 + c_scale).max(x_scale / order.sqrt()).max(1.0);
    let z: Vec<Part> = prob.cones.iter().map(|&k| Part::identity(k, eta)).collect();
    let mut s = State {
        x,
        xf,
        y: DVector::zeros(prob.m()),
        z,
    };

    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut last = measure(&prob, &s, order);
    // The dual objective may exceed the primal one only by a tenth of the
    // gap tolerance, so every returned value respects weak duality to ~1e-9.
    let inversion_tol = 0.1 * opts.gap_tol;
    let inversion = |m: &Measures| (m.dobj - m.pobj).max(0.0) / (1.0 + m.pobj.abs() + m.dobj.abs());
    let score = |m: &Measures| {
        let r = &m.residuals;
        let sc = (r.relative_gap / opts.gap_tol)
            .max(r.primal_infeasibility / opts.feas_tol)
            .max(r.dual_infeasibility / opts.feas_tol);
        // Iterates that break weak duality are never returned as best.
        if inversion(m) <= inversion_tol {
            sc
        } else {
            f64::INFINITY
        }
    };
    let mut best: Option<(f64, usize, State, Measures)> = None;
    for iter in 0..=opts.max_iter {
        iterations = iter;
        last = measure(&prob, &s, order);
        let r = last.residuals;
        let sc = score(&last);
        if sc.is_finite() && best.as_ref().is_none_or(|b| sc < b.0) {
            best = Some((sc, iter, s.clone(), last.clone()));
        }
        if r.relative_gap <= opts.gap_tol
            && r.primal_infeasibility <= opts.feas_tol
            && r.dual_infeasibility <= opts.feas_tol
            && inversion(&last) <= inversion_tol
        {
            status = SolveStatus::Optimal;
            break;
        }
        if iter == opts.max_iter {
            break;
        }
        if ![last.pobj, last.dobj, last.mu]
            .iter()
            .all(|v| v.is_finite())
        {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let Some(newton) = Newton::new(&prob, &s.x, &s.z) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let zero_target: Vec<Part> = prob.cones.iter().map(|&k| Part::zeros(k)).collect();
        let Some(pred) = newton.direction(&zero_target, &last.rp, &last.rd, &last.rf) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some((ap, ad)) = step_lengths(&s.x, &s.z, &pred) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut xz_aff = 0.0;
        for k in 0..prob.cones.len() {
            let mut xa = s.x[k].clone();
            xa.axpy(ap, &pred.dx[k]);
            let mut za = s.z[k].clone();
            za.axpy(ad, &pred.dz[k]);
            xz_aff += xa.dot(&za);
        }
        let mu = last.mu.max(0.0);
        let sigma = if mu > 0.0 {
            ((xz_aff / order) / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };
        let g = corrector_target(&prob, sigma * mu, &pred, &newton.zinv);
        let mut step = newton
            .direction(&g, &last.rp, &last.rd, &last.rf)
            .and_then(|dir| step_lengths(&s.x, &s.z, &dir).map(|lens| (dir, lens)))
            .filter(|(_, (ap, ad))| ap.max(*ad) * STEP_FRACTION >= MIN_STEP);
        if step.is_none() {
            // The second-order correction can stall on degenerate faces;
            // a pure centering step usually recovers.
            let g = centering_target(&prob, mu, &newton.zinv);
            step = newton
                .direction(&g, &last.rp, &last.rd, &last.rf)
                .and_then(|dir| step_lengths(&s.x, &s.z, &dir).map(|lens| (dir, lens)))
                .filter(|(_, (ap, ad))| ap.max(*ad) * STEP_FRACTION >= MIN_STEP);
        }
        let Some((dir, (ap, ad))) = step else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        for k in 0..prob.cones.len() {
            s.x[k].axpy(ap, &dir.dx[k]);
            s.z[k].axpy(ad, &dir.dz[k]);
            if let (Part::Sdp(xm), Part::Sdp(zm)) = (&mut s.x[k], &mut s.z[k]) {
                *xm = sym(xm);
                *zm = sym(zm);
            }
        }
        s.xf.axpy(ap, &dir.dxf, 1.0);
        s.y.axpy(ad, &dir.dy, 1.0);
    }

    if status != SolveStatus::Optimal {
        if let Some((sc, iter, state, measures)) = best {
            if sc <= INACCURATE_FACTOR {
                status = SolveStatus::Inaccurate;
                iterations = iter;
                s = state;
                last = measures;
            }
        }
    }
    let (blocks, dual_slack) = to_user(&prob, p, &s);
    let pobj = last.pobj;
    let dobj = last.dobj;
    SdpSolution {
        status,
        primal_value: pobj,
        dual_value: dobj,
        blocks,
        y: s.y.iter().copied().collect(),
        dual_slack,
        residuals: Residuals {
            relative_gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            ..last.residuals
        },
        iterations,
    }
}
