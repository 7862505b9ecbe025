//! Two-qubit Clifford group elements as signed Pauli tableaux.
//!
//! An element is stored by the images of the four generators X(x)I, Z(x)I,
//! I(x)X and I(x)Z under conjugation U P U^dagger, each a Hermitian Pauli
//! with a sign. Pauli indices follow the QPT basis, 4i + j for B_i (x) B_j
//! with B = (I, X, Y, Z).

use std::collections::{BinaryHeap, HashMap};
use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::dynamics::ideal_zx90;
use crate::numerics::CMatrix;
use crate::qpt::{pauli, pauli_basis};

/// Number of elements of the two-qubit Clifford group modulo global phase.
pub const CLIFFORD2_ORDER: usize = 11_520;

/// Signed Hermitian Pauli: `sign * A_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedPauli {
    pub index: u8,
    pub negative: bool,
}

/// Generator order in a tableau.
const GENERATORS: [u8; 4] = [4, 12, 1, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    images: [SignedPauli; 4],
    unitary: CMatrix,
}

fn bits(index: u8) -> [u8; 4] {
    let (a, b) = (index / 4, index % 4);
    let x = |k: u8| u8::from(k == 1 || k == 2);
    let z = |k: u8| u8::from(k == 2 || k == 3);
    [x(a), z(a), x(b), z(b)]
}

fn from_bits(b: [u8; 4]) -> u8 {
    let one = |x: u8, z: u8| match (x, z) {
        (0, 0) => 0,
        (1, 0) => 1,
        (1, 1) => 2,
        _ => 3,
    };
    4 * one(b[0], b[1]) + one(b[2], b[3])
}

/// Symplectic product of two Paulis: 1 if they anticommute.
fn symplectic(a: u8, b: u8) -> u8 {
    let (p, q) = (bits(a), bits(b));
    (p[0] * q[1] + p[1] * q[0] + p[2] * q[3] + p[3] * q[2]) % 2
}

/// Product of single-qubit Paulis: B_a B_b = i^phase B_c.
fn multiply_one(a: u8, b: u8) -> (u8, u8) {
    match (a, b) {
        (0, k) | (k, 0) => (k, 0),
        (x, y) if x == y => (0, 0),
        (1, 2) | (2, 3) | (3, 1) => (other(a, b), 1),
        _ => (other(a, b), 3),
    }
}

fn other(a: u8, b: u8) -> u8 {
    6 - a - b
}

/// Pauli with a phase i^phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PhasedPauli {
    index: u8,
    phase: u8,
}

impl PhasedPauli {
    fn identity() -> Self {
        Self { index: 0, phase: 0 }
    }

    fn from_signed(p: SignedPauli) -> Self {
        Self {
            index: p.index,
            phase: if p.negative { 2 } else { 0 },
        }
    }

    fn times(self, other: Self) -> Self {
        let (a0, a1) = (self.index / 4, self.index % 4);
        let (b0, b1) = (other.index / 4, other.index % 4);
        let (c0, p0) = multiply_one(a0, b0);
        let (c1, p1) = multiply_one(a1, b1);
        Self {
            index: 4 * c0 + c1,
            phase: (self.phase + other.phase + p0 + p1) % 4,
        }
    }
}

fn basis() -> &'static [CMatrix] {
    static BASIS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    BASIS.get_or_init(pauli_basis)
}

fn signed_matrix(p: SignedPauli) -> CMatrix {
    let m = &basis()[p.index as usize];
    if p.negative {
        -m
    } else {
        m.clone()
    }
}

/// The signed Pauli equal to `m`, if any.
fn identify_pauli(m: &CMatrix, basis: &[CMatrix]) -> Option<SignedPauli> {
    for (k, a) in basis.iter().enumerate() {
        let t = (a * m).trace() / 4.0;
        if (t.norm() - 1.0).abs() < 1e-6 {
            if t.im.abs() > 1e-6 {
                return None;
            }
            return Some(SignedPauli {
                index: k as u8,
                negative: t.re < 0.0,
            });
        }
    }
    None
}

impl CliffordElement {
    pub fn identity() -> Self {
        Self::from_unitary(&CMatrix::identity(4, 4)).expect("identity is Clifford")
    }

    /// Tableau of a 4x4 unitary, or `None` when it is not Clifford.
    pub fn from_unitary(u: &CMatrix) -> Option<Self> {
        let basis = basis();
        let mut images = [SignedPauli { index: 0, negative: false }; 4];
        for (slot, &g) in GENERATORS.iter().enumerate() {
            let m = u * &basis[g as usize] * u.adjoint();
            images[slot] = identify_pauli(&m, basis)?;
        }
        Some(Self {
            images,
            unitary: u.clone(),
        })
    }

    /// Element with the given generator images. The images must satisfy
    /// the canonical commutation relations.
    pub fn from_images(images: [SignedPauli; 4]) -> Option<Self> {
        let idx: Vec<u8> = images.iter().map(|p| p.index).collect();
        if idx.contains(&0) {
            return None;
        }
        for i in 0..4 {
            for j in 0..4 {
                let want = u8::from(i / 2 == j / 2 && i != j);
                if symplectic(idx[i], idx[j]) != want {
                    return None;
                }
            }
        }
        // U|00> spans the joint +1 eigenspace of the images of Z(x)I, I(x)Z
        let id = CMatrix::identity(4, 4);
        let proj = (&id + signed_matrix(images[1])) * (&id + signed_matrix(images[3])) * Complex64::new(0.25, 0.0);
        let col = (0..4)
            .map(|k| proj.column(k).into_owned())
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
        let psi: DVector<Complex64> = &col / Complex64::new(col.norm(), 0.0);
        let (x0, x1) = (signed_matrix(images[0]), signed_matrix(images[2]));
        let mut u = CMatrix::zeros(4, 4);
        u.set_column(0, &psi);
        u.set_column(1, &(&x1 * &psi));
        u.set_column(2, &(&x0 * &psi));
        u.set_column(3, &(&x0 * &x1 * &psi));
        Some(Self { images, unitary: u })
    }

    /// Uniform sample: a uniformly random symplectic matrix over GF(2)
    /// by rejection, then uniformly random signs.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let word: u16 = rng.random();
            let cols: [u8; 4] = std::array::from_fn(|k| ((word >> (4 * k)) & 0xF) as u8);
            let idx = cols.map(|c| from_bits([c & 1, (c >> 1) & 1, (c >> 2) & 1, (c >> 3) & 1]));
            let signs: u8 = rng.random_range(0..16);
            let images = std::array::from_fn(|k| SignedPauli {
                index: idx[k],
                negative: (signs >> k) & 1 == 1,
            });
            if let Some(c) = Self::from_images(images) {
                return c;
            }
        }
    }

    pub fn images(&self) -> &[SignedPauli; 4] {
        &self.images
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    /// Packed tableau, unique per group element.
    pub fn key(&self) -> u32 {
        self.images
            .iter()
            .fold(0u32, |acc, p| (acc << 5) | (u32::from(p.index) << 1) | u32::from(p.negative))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &CliffordElement) -> CliffordElement {
        Self::from_unitary(&(&next.unitary * &self.unitary)).expect("Clifford group is closed")
    }

    pub fn inverse(&self) -> CliffordElement {
        Self::from_unitary(&self.unitary.adjoint()).expect("Clifford group is closed")
    }

    /// Image of A_index under conjugation, from the tableau alone.
    pub fn conjugate(&self, index: u8) -> SignedPauli {
        let b = bits(index);
        let img = self.images.map(PhasedPauli::from_signed);
        let mut out = PhasedPauli::identity();
        // A = i^(#Y) X0^x0 Z0^z0 X1^x1 Z1^z1 since Y = i X Z
        let mut ys = 0;
        for (q, (x, z)) in [(b[0], b[1]), (b[2], b[3])].into_iter().enumerate() {
            if x == 1 {
                out = out.times(img[2 * q]);
            }
            if z == 1 {
                out = out.times(img[2 * q + 1]);
            }
            ys += x * z;
        }
        let phase = (out.phase + ys) % 4;
        debug_assert!(phase.is_multiple_of(2), "Clifford image of a Hermitian Pauli is Hermitian");
        SignedPauli {
            index: out.index,
            negative: phase == 2,
        }
    }
}

fn s_gate() -> CMatrix {
    let mut s = CMatrix::identity(2, 2);
    s[(1, 1)] = Complex64::new(0.0, 1.0);
    s
}

fn hadamard() -> CMatrix {
    (pauli(1) + pauli(3)) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
}

/// exp(-i pi/4 P) for a single-qubit Pauli.
fn quarter_turn(k: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::identity(2, 2) * Complex64::new(s, 0.0) - pauli(k) * Complex64::new(0.0, s)
}

fn on_qubit(q: usize, g: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    if q == 0 {
        g.kronecker(&id)
    } else {
        id.kronecker(g)
    }
}

/// Hadamard and phase on each qubit plus CNOT (control first).
pub fn standard_generators() -> Vec<CMatrix> {
    let mut cnot = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(i, j)] = Complex64::new(1.0, 0.0);
    }
    vec![on_qubit(0, &hadamard()), on_qubit(1, &hadamard()), on_qubit(0, &s_gate()), on_qubit(1, &s_gate()), cnot]
}

/// Breadth-first closure of a generating set; returns the element count.
pub fn enumerate_group(generators: &[CMatrix]) -> usize {
    let gens: Vec<CliffordElement> = generators
        .iter()
        .map(|g| CliffordElement::from_unitary(g).expect("generator must be Clifford"))
        .collect();
    let start = CliffordElement::identity();
    let mut seen = std::collections::HashSet::from([start.key()]);
    let mut frontier = vec![start];
    while let Some(c) = frontier.pop() {
        for g in &gens {
            let n = c.then(g);
            if seen.insert(n.key()) {
                frontier.push(n);
            }
        }
    }
    seen.len()
}

/// Pulse cost of one Clifford in a native decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseCount {
    pub single_qubit_layers: u32,
    pub two_qubit_gates: u32,
    /// Total duration (ns).
    pub duration_ns: u32,
}

/// Single-qubit pulse slot (pulse plus spacing) and echoed ZX_pi/2 length.
pub const SINGLE_QUBIT_SLOT_NS: u32 = 45;
pub const TWO_QUBIT_GATE_NS: u32 = 220;

/// Shortest native decomposition of every Clifford: X_pi/2 and Y_pi/2
/// pulses (simultaneous on both qubits allowed), virtual Z_pi/2 at no cost
/// and the echoed ZX_pi/2 gate, by Dijkstra search over the group.
pub fn pulse_counts() -> &'static HashMap<u32, PulseCount> {
    static TABLE: OnceLock<HashMap<u32, PulseCount>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut moves: Vec<(CliffordElement, u32, u32)> = Vec::new();
        let one = [quarter_turn(1), quarter_turn(2)];
        for q in 0..2 {
            moves.push((CliffordElement::from_unitary(&on_qubit(q, &quarter_turn(3))).unwrap(), 0, 0));
            for g in &one {
                moves.push((CliffordElement::from_unitary(&on_qubit(q, g)).unwrap(), 1, 0));
            }
        }
        for a in &one {
            for b in &one {
                moves.push((CliffordElement::from_unitary(&a.kronecker(b)).unwrap(), 1, 0));
            }
        }
        moves.push((CliffordElement::from_unitary(&ideal_zx90()).unwrap(), 0, 1));
        let cost = |l: u32, t: u32| l * SINGLE_QUBIT_SLOT_NS + t * TWO_QUBIT_GATE_NS;

        let mut best: HashMap<u32, PulseCount> = HashMap::new();
        let mut elements: HashMap<u32, CliffordElement> = HashMap::new();
        let start = CliffordElement::identity();
        let mut heap = BinaryHeap::new();
        heap.push(std::cmp::Reverse((0u32, 0u32, 0u32, start.key())));
        elements.insert(start.key(), start);
        while let Some(std::cmp::Reverse((d, layers, twos, key))) = heap.pop() {
            if best.contains_key(&key) {
                continue;
            }
            best.insert(
                key,
                PulseCount {
                    single_qubit_layers: layers,
                    two_qubit_gates: twos,
                    duration_ns: d,
                },
            );
            let current = elements[&key].clone();
            for (g, l, t) in &moves {
                let n = current.then(g);
                let k = n.key();
                if !best.contains_key(&k) {
                    elements.entry(k).or_insert(n);
                    let (nl, nt) = (layers + l, twos + t);
                    heap.push(std::cmp::Reverse((cost(nl, nt), nl, nt, k)));
                }
            }
        }
        best
    })
}

pub fn pulse_count(c: &CliffordElement) -> PulseCount {
    pulse_counts()[&c.key()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::unitary_deviation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn same_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
        ((a.adjoint() * b).trace().norm() - 4.0).abs() < 1e-9
    }

    #[test]
    fn single_qubit_product_table() {
        // X Y = i Z, Y Z = i X, Z X = i Y
        assert_eq!(multiply_one(1, 2), (3, 1));
        assert_eq!(multiply_one(2, 3), (1, 1));
        assert_eq!(multiply_one(3, 1), (2, 1));
        assert_eq!(multiply_one(2, 1), (3, 3));
        for a in 0..4u8 {
            for b in 0..4u8 {
                let (c, ph) = multiply_one(a, b);
                let lhs = pauli(a as usize) * pauli(b as usize);
                let rhs = pauli(c as usize) * Complex64::new(0.0, 1.0).powu(u32::from(ph));
                assert!((lhs - rhs).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn samples_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = pauli_basis();
        let id = CliffordElement::identity();
        for _ in 0..1000 {
            let c = CliffordElement::sample(&mut rng);
            assert!(unitary_deviation(c.unitary()) < 1e-12);
            assert_eq!(CliffordElement::from_unitary(c.unitary()).unwrap().key(), c.key());
            assert_eq!(c.then(&c.inverse()).key(), id.key());
            for m in 1..16u8 {
                let img = c.conjugate(m);
                let direct = c.unitary() * &basis[m as usize] * c.unitary().adjoint();
                assert!((direct - signed_matrix(img)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn generators_reach_whole_group() {
        assert_eq!(enumerate_group(&standard_generators()), CLIFFORD2_ORDER);
    }

    #[test]
    fn sampler_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000usize;
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for _ in 0..n {
            *counts.entry(CliffordElement::sample(&mut rng).key()).or_default() += 1;
        }
        assert_eq!(counts.len(), CLIFFORD2_ORDER);
        let expected = n as f64 / CLIFFORD2_ORDER as f64;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square with 11519 dof: mean 11519, sd 151.8; z = 3.09 at p = 0.001
        let dof = (CLIFFORD2_ORDER - 1) as f64;
        assert!(chi2 < dof + 3.09 * (2.0 * dof).sqrt(), "{chi2}");
    }

    #[test]
    fn pulse_table_covers_group() {
        let table = pulse_counts();
        assert_eq!(table.len(), CLIFFORD2_ORDER);
        assert_eq!(pulse_count(&CliffordElement::identity()).duration_ns, 0);
        let zx = CliffordElement::from_unitary(&ideal_zx90()).unwrap();
        assert_eq!(pulse_count(&zx).two_qubit_gates, 1);
        let hist = table.values().fold([0usize; 4], |mut h, p| {
            h[p.two_qubit_gates as usize] += 1;
            h
        });
        // local, CNOT-like, iSWAP-like and SWAP-like classes
        assert_eq!(hist, [576, 5184, 5184, 576]);
    }

    #[test]
    fn rejects_non_clifford() {
        let t = CMatrix::from_diagonal(&DVector::from_column_slice(&[
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, 0.3),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        assert!(CliffordElement::from_unitary(&t).is_none());
        let bad = [4u8, 4, 1, 3].map(|index| SignedPauli { index, negative: false });
        assert!(CliffordElement::from_images(bad).is_none());
    }

    #[test]
    fn image_construction_matches_unitary() {
        for g in standard_generators() {
            let c = CliffordElement::from_unitary(&g).unwrap();
            let rebuilt = CliffordElement::from_images(*c.images()).unwrap();
            assert!(same_up_to_phase(rebuilt.unitary(), &g));
        }
    }
}
