//! Search for a biseparable decomposition of a tripartite state.
//!
//! Minimizes `‖ρ − σ‖_F` over `σ ∈ conv{|v⟩⟨v| : v product across some
//! bipartition}` with pairwise Frank–Wolfe steps. The linear subproblem
//! `max ⟨v|ρ − σ|v⟩` is solved per cut by alternating top-eigenvector
//! ascent over the two factors. A `found` result carries an explicit
//! decomposition; `not found` proves nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{digits, haar_vector, singular_values, top_eigenvector, ComplexMatrix, DensityMatrix};
use crate::rng::{substream, StreamRng};
use crate::scalar::C;

type C64 = C<f64>;

/// Largest supported total dimension.
pub const MAX_BISEP_DIM: usize = 64;

/// Schmidt coefficients beyond the first must stay below this for an atom
/// to count as product across its cut.
pub const SCHMIDT_TOL: f64 = 1e-8;

/// Random restarts tried per cut on each step before the full budget.
const QUICK_RESTARTS: usize = 2;
const ASCENT_SWEEPS: usize = 100;
/// Pairwise steps among active atoms after each new atom.
const INNER_STEPS: usize = 50;
/// Frank–Wolfe iterations between refinement passes.
const REFINE_EVERY: usize = 25;
const REFINE_SWEEPS: usize = 5;
const REFINE_ASCENT: usize = 3;
const STOP_MARGIN: f64 = 0.1;
const CONVERGENCE_EVERY: usize = 100;
/// Ratio of separation bound to distance at which the search gives up.
const CONVERGED: f64 = 0.999;
/// `1 − |⟨u|v⟩|²` below which two atoms are merged.
const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisepBudget {
    /// Random restarts per cut when the warm-started ascent stalls.
    pub restarts: usize,
    pub iterations: usize,
    /// Frobenius distance below which a decomposition counts as found.
    pub tolerance: f64,
}

impl Default for BisepBudget {
    fn default() -> Self {
        Self { restarts: 50, iterations: 2000, tolerance: 1e-6 }
    }
}

/// `weight · |v⟩⟨v|` with `v` product across `side | rest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisepAtom {
    pub side: Vec<usize>,
    pub weight: f64,
    pub vector: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisepCertificate {
    pub dims: Vec<usize>,
    pub atoms: Vec<BisepAtom>,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisepResult {
    pub found: bool,
    pub distance: f64,
    pub iterations: usize,
    /// Present only when `found`.
    pub certificate: Option<BisepCertificate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub reconstruction_error: f64,
    /// Largest second Schmidt coefficient over all atoms.
    pub max_schmidt_tail: f64,
    pub weights_valid: bool,
}

impl CertificateCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.weights_valid && self.reconstruction_error < tolerance && self.max_schmidt_tail < SCHMIDT_TOL
    }
}

/// Index bookkeeping for one bipartition.
struct Cut {
    side: Vec<usize>,
    da: usize,
    db: usize,
    /// Full index → (index on `side`, index on the rest).
    split: Vec<(usize, usize)>,
}

impl Cut {
    fn new(dims: &[usize], side: Vec<usize>) -> Self {
        let total: usize = dims.iter().product();
        let mut da = 1;
        let mut db = 1;
        for (p, &d) in dims.iter().enumerate() {
            if side.contains(&p) {
                da *= d;
            } else {
                db *= d;
            }
        }
        let split = (0..total)
            .map(|idx| {
                let mut a = 0;
                let mut b = 0;
                for (p, (&x, &d)) in digits(idx, dims).iter().zip(dims).enumerate() {
                    if side.contains(&p) {
                        a = a * d + x;
                    } else {
                        b = b * d + x;
                    }
                }
                (a, b)
            })
            .collect();
        Self { side, da, db, split }
    }

    fn join(&self, a: &[C64], b: &[C64]) -> Vec<C64> {
        self.split.iter().map(|&(i, j)| a[i] * b[j]).collect()
    }

    /// Reshapes `v` into a `da × db` matrix.
    fn unfold(&self, v: &[C64]) -> ComplexMatrix<f64> {
        let mut m = ComplexMatrix::zeros(self.da, self.db);
        for (&(i, j), &x) in self.split.iter().zip(v) {
            m[(i, j)] = x;
        }
        m
    }

    /// `⟨b|G|b⟩` contracted over the rest (`on_side`) or `⟨a|G|a⟩` over
    /// the side.
    fn contract(&self, g: &ComplexMatrix<f64>, fixed: &[C64], on_side: bool) -> ComplexMatrix<f64> {
        let n = if on_side { self.da } else { self.db };
        let mut m = ComplexMatrix::zeros(n, n);
        for (r, &(ra, rb)) in self.split.iter().enumerate() {
            let (ro, rf) = if on_side { (ra, rb) } else { (rb, ra) };
            let left = fixed[rf].conj();
            if left.norm_sqr() == 0.0 {
                continue;
            }
            let row = g.row(r);
            for (c, &(ca, cb)) in self.split.iter().enumerate() {
                let (co, cf) = if on_side { (ca, cb) } else { (cb, ca) };
                m[(ro, co)] += left * row[c] * fixed[cf];
            }
        }
        m
    }

    /// Alternating ascent of `⟨a⊗b|G|a⊗b⟩` from `b`.
    fn ascend(&self, g: &ComplexMatrix<f64>, b: Vec<C64>) -> Result<(f64, Vec<C64>)> {
        self.ascend_steps(g, b, ASCENT_SWEEPS)
    }

    fn ascend_steps(&self, g: &ComplexMatrix<f64>, mut b: Vec<C64>, sweeps: usize) -> Result<(f64, Vec<C64>)> {
        let mut last = f64::NEG_INFINITY;
        let mut a = Vec::new();
        for _ in 0..sweeps {
            a = top_eigenvector(&self.contract(g, &b, true))?.1;
            let (val, nb) = top_eigenvector(&self.contract(g, &a, false))?;
            b = nb;
            if val - last <= 1e-14 * val.abs().max(1e-3) {
                last = val;
                break;
            }
            last = val;
        }
        Ok((last, self.join(&a, &b)))
    }

    /// Factor of `v` on the rest, read off the largest row of its unfolding.
    fn rest_factor(&self, v: &[C64]) -> Vec<C64> {
        let m = self.unfold(v);
        let best = (0..self.da)
            .max_by(|&x, &y| {
                let nx: f64 = m.row(x).iter().map(|z| z.norm_sqr()).sum();
                let ny: f64 = m.row(y).iter().map(|z| z.norm_sqr()).sum();
                nx.total_cmp(&ny)
            })
            .expect("nonempty side");
        let row = m.row(best);
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        row.iter().map(|z| z / norm).collect()
    }
}

fn expectation(g: &ComplexMatrix<f64>, v: &[C64]) -> f64 {
    g.sandwich(v, v).re
}

fn overlap_sq(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// `G ← G + w |v⟩⟨v|`.
fn add_outer(g: &mut ComplexMatrix<f64>, v: &[C64], w: f64) {
    let n = v.len();
    for i in 0..n {
        let vi = v[i] * w;
        for j in 0..n {
            g[(i, j)] += vi * v[j].conj();
        }
    }
}

/// `G ← G − γ (|s⟩⟨s| − |v⟩⟨v|)`.
fn pairwise_update(g: &mut ComplexMatrix<f64>, s: &[C64], v: &[C64], gamma: f64) {
    let n = s.len();
    for i in 0..n {
        let si = s[i] * gamma;
        let vi = v[i] * gamma;
        for j in 0..n {
            g[(i, j)] -= si * s[j].conj() - vi * v[j].conj();
        }
    }
}

struct Active {
    cut: usize,
    weight: f64,
    vector: Vec<C64>,
    /// `⟨v|G|v⟩` for the current residual.
    value: f64,
}

struct Search<'a> {
    cuts: &'a [Cut],
    g: ComplexMatrix<f64>,
    atoms: Vec<Active>,
}

impl Search<'_> {
    /// Moves weight `γ*` from atom `away` to the new vector `s`, or to an
    /// existing atom when `target` is given.
    fn step(&mut self, s: Vec<C64>, cut: usize, s_value: f64, away: usize, target: Option<usize>) -> bool {
        let v_value = self.atoms[away].value;
        let gap = s_value - v_value;
        let d_norm_sq = 2.0 - 2.0 * overlap_sq(&s, &self.atoms[away].vector);
        if gap <= 0.0 || d_norm_sq <= 1e-300 {
            return false;
        }
        let gamma = (gap / d_norm_sq).min(self.atoms[away].weight);
        if gamma <= 0.0 {
            return false;
        }
        let v = self.atoms[away].vector.clone();
        pairwise_update(&mut self.g, &s, &v, gamma);
        for a in &mut self.atoms {
            a.value -= gamma * (overlap_sq(&a.vector, &s) - overlap_sq(&a.vector, &v));
        }
        match target {
            Some(t) => self.atoms[t].weight += gamma,
            None => {
                let value = expectation(&self.g, &s);
                self.atoms.push(Active { cut, weight: gamma, vector: s, value });
            }
        }
        self.atoms[away].weight -= gamma;
        if self.atoms[away].weight <= 1e-15 {
            let w = self.atoms.swap_remove(away).weight;
            // keep the total weight exact
            if let Some(first) = self.atoms.first_mut() {
                first.weight += w;
            }
        }
        true
    }

    /// Block-coordinate sweeps: each atom is re-fitted to the residual
    /// without it, `w·|v⟩⟨v|` with `v` ascended from its current value and
    /// `w = ⟨v|R|v⟩`. Weights then no longer sum to one exactly; the trace
    /// defect vanishes with the residual.
    fn refine(&mut self, sweeps: usize) -> Result<()> {
        for _ in 0..sweeps {
            for i in 0..self.atoms.len() {
                let old = self.atoms[i].vector.clone();
                let w_old = self.atoms[i].weight;
                add_outer(&mut self.g, &old, w_old);
                let cut = &self.cuts[self.atoms[i].cut];
                let (val, v) = cut.ascend_steps(&self.g, cut.rest_factor(&old), REFINE_ASCENT)?;
                let w = val.max(0.0);
                add_outer(&mut self.g, &v, -w);
                self.atoms[i].vector = v;
                self.atoms[i].weight = w;
            }
            self.atoms.retain(|a| a.weight > 0.0);
        }
        self.merge_duplicates();
        let g = &self.g;
        for a in &mut self.atoms {
            a.value = expectation(g, &a.vector);
        }
        Ok(())
    }

    /// Folds atoms that coincide up to phase into one; `G` is unchanged.
    fn merge_duplicates(&mut self) {
        let mut kept: Vec<Active> = Vec::with_capacity(self.atoms.len());
        for a in self.atoms.drain(..) {
            match kept.iter_mut().find(|k| overlap_sq(&k.vector, &a.vector) > 1.0 - DUPLICATE_TOL) {
                Some(k) if a.weight > 0.0 => {
                    // the weight moves onto k's vector; the residual absorbs the tiny difference
                    add_outer(&mut self.g, &a.vector, a.weight);
                    add_outer(&mut self.g, &k.vector.clone(), -a.weight);
                    k.weight += a.weight;
                }
                _ => kept.push(a),
            }
        }
        self.atoms = kept;
    }

    fn away_atom(&self) -> usize {
        (0..self.atoms.len())
            .min_by(|&x, &y| self.atoms[x].value.total_cmp(&self.atoms[y].value))
            .expect("active set is never empty")
    }

    /// Pairwise steps within the active set.
    fn local_steps(&mut self) {
        for _ in 0..INNER_STEPS {
            let best = (0..self.atoms.len())
                .max_by(|&x, &y| self.atoms[x].value.total_cmp(&self.atoms[y].value))
                .expect("active set is never empty");
            let away = self.away_atom();
            if best == away {
                return;
            }
            let s = self.atoms[best].vector.clone();
            let (cut, val) = (self.atoms[best].cut, self.atoms[best].value);
            if !self.step(s, cut, val, away, Some(best)) {
                return;
            }
        }
    }

    /// Best product vector found over all cuts.
    fn oracle(&self, warm: &mut [Vec<C64>], restarts: usize, rng: &mut StreamRng) -> Result<(f64, usize, Vec<C64>)> {
        let mut best = (f64::NEG_INFINITY, 0, Vec::new());
        for (k, cut) in self.cuts.iter().enumerate() {
            let mut starts = vec![warm[k].clone()];
            for _ in 0..restarts {
                starts.push(haar_vector::<f64, _>(cut.db, rng));
            }
            for b in starts {
                let (val, v) = cut.ascend(&self.g, b)?;
                if val > best.0 {
                    best = (val, k, v);
                }
            }
            if best.1 == k {
                warm[k] = cut.rest_factor(&best.2);
            }
        }
        Ok(best)
    }
}

fn bipartitions(n: usize) -> Vec<Vec<usize>> {
    // subsets of the first n − 1 parties; the last party is always on the rest
    (1..(1usize << (n - 1))).map(|mask| (0..n - 1).filter(|&p| mask & (1 << p) != 0).collect()).collect()
}

/// Searches for a biseparable decomposition of a 3-party `rho` with total
/// dimension at most 64.
pub fn bisep_search(rho: &DensityMatrix<f64>, budget: &BisepBudget, seed: u64) -> Result<BisepResult> {
    if rho.n_parties() != 3 {
        return Err(Error::DimensionMismatch(format!("need 3 parties, got {}", rho.n_parties())));
    }
    if rho.dim() > MAX_BISEP_DIM {
        return Err(Error::InvalidDimension(format!("total dimension {} exceeds {MAX_BISEP_DIM}", rho.dim())));
    }
    if !(budget.tolerance > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance {}", budget.tolerance)));
    }
    let dims = rho.dims().to_vec();
    let n = rho.dim();
    let cuts: Vec<Cut> = bipartitions(dims.len()).into_iter().map(|s| Cut::new(&dims, s)).collect();
    let mut rng = substream(seed, 0);

    // start from the diagonal: computational basis states are product across every cut
    let mut g = rho.matrix().clone();
    let mut atoms = Vec::new();
    let diag: Vec<f64> = (0..n).map(|i| rho.matrix()[(i, i)].re.max(0.0)).collect();
    let total: f64 = diag.iter().sum();
    for (i, &p) in diag.iter().enumerate() {
        if p > 0.0 {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[i] = C64::new(1.0, 0.0);
            g[(i, i)] -= C64::new(p / total, 0.0);
            atoms.push((e, p / total));
        }
    }
    let atoms = atoms
        .into_iter()
        .map(|(vector, weight)| Active { cut: 0, weight, value: expectation(&g, &vector), vector })
        .collect();
    let mut search = Search { cuts: &cuts, g, atoms };
    let mut warm: Vec<Vec<C64>> = cuts.iter().map(|c| haar_vector::<f64, _>(c.db, &mut rng)).collect();

    let mut iterations = 0;
    let mut distance = search.g.frobenius_norm();
    // the margin absorbs the renormalization of the weights below
    while iterations < budget.iterations && distance >= STOP_MARGIN * budget.tolerance {
        iterations += 1;
        let away = search.away_atom();
        let (mut val, mut cut, mut s) = search.oracle(&mut warm, QUICK_RESTARTS, &mut rng)?;
        if val <= search.atoms[away].value {
            (val, cut, s) = search.oracle(&mut warm, budget.restarts, &mut rng)?;
        }
        if !search.step(s, cut, val, away, None) {
            break;
        }
        search.local_steps();
        if iterations % REFINE_EVERY == 0 {
            search.refine(REFINE_SWEEPS)?;
        }
        distance = search.g.frobenius_norm();
        if iterations % CONVERGENCE_EVERY == 0 {
            // W = G/‖G‖ separates ρ from every product vector the oracle can
            // reach by (⟨W,ρ⟩ − max ⟨s|W|s⟩); once that nearly equals the
            // distance, more iterations cannot shrink it
            let (top, _, _) = search.oracle(&mut warm, budget.restarts, &mut rng)?;
            let bound = (search.g.trace_product_re(rho.matrix()) - top) / distance;
            if bound > CONVERGED * distance {
                break;
            }
        }
    }

    // refinement leaves a trace defect of the order of the residual
    let total: f64 = search.atoms.iter().map(|a| a.weight).sum();
    let certificate = BisepCertificate {
        dims: dims.clone(),
        atoms: search
            .atoms
            .iter()
            .map(|a| BisepAtom { side: cuts[a.cut].side.clone(), weight: a.weight / total, vector: a.vector.clone() })
            .collect(),
        distance: 0.0,
    };
    // report the distance of the assembled decomposition, not the running residual
    let check = verify_certificate(rho, &certificate)?;
    let found = check.passed(budget.tolerance);
    Ok(BisepResult {
        found,
        distance: check.reconstruction_error,
        iterations,
        certificate: found.then_some(BisepCertificate { distance: check.reconstruction_error, ..certificate }),
    })
}

/// Rebuilds `σ` from a certificate and checks every atom's Schmidt rank
/// across its declared cut.
pub fn verify_certificate(rho: &DensityMatrix<f64>, cert: &BisepCertificate) -> Result<CertificateCheck> {
    if cert.dims != rho.dims() {
        return Err(Error::DimensionMismatch(format!("certificate dims {:?} vs {:?}", cert.dims, rho.dims())));
    }
    let n = rho.dim();
    let mut sigma = ComplexMatrix::zeros(n, n);
    let mut max_tail: f64 = 0.0;
    let mut weight_sum = 0.0;
    let mut weights_valid = true;
    for atom in &cert.atoms {
        let ok_side = !atom.side.is_empty()
            && atom.side.len() < cert.dims.len()
            && atom.side.iter().all(|&p| p < cert.dims.len());
        if atom.vector.len() != n || !ok_side {
            return Err(Error::Malformed("certificate atom does not fit the state".into()));
        }
        weights_valid &= atom.weight >= 0.0;
        weight_sum += atom.weight;
        let norm = atom.vector.iter().map(|z| z.norm_sqr()).sum::<f64>();
        weights_valid &= (norm - 1.0).abs() < 1e-9;
        sigma.add_scaled(&ComplexMatrix::outer(&atom.vector, &atom.vector), atom.weight);
        let cut = Cut::new(&cert.dims, atom.side.clone());
        let sv = singular_values(&cut.unfold(&atom.vector));
        max_tail = max_tail.max(sv.get(1).copied().unwrap_or(0.0));
    }
    weights_valid &= (weight_sum - 1.0).abs() < 1e-9;
    Ok(CertificateCheck {
        reconstruction_error: rho.matrix().sub(&sigma).frobenius_norm(),
        max_schmidt_tail: max_tail,
        weights_valid,
    })
}
