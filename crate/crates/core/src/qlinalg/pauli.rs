use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::dense::{DenseOperator, I, ONE, ZERO};
use crate::error::{OtocError, Result};

pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Mat2 {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// `(phase exponent of i, letter)` with `self·other = i^e·letter`.
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `i^phase · P_1 ⊗ … ⊗ P_n`, qubit 1 leftmost.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
    phase: u8,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, phase: u8) -> Self {
        Self {
            letters,
            phase: phase % 4,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n], 0)
    }

    /// `letter` on `qubit` (1-based), identity elsewhere.
    pub fn single(n: usize, qubit: usize, letter: Pauli) -> Result<Self> {
        if qubit == 0 || qubit > n {
            return Err(OtocError::InvalidArgument(format!(
                "qubit {qubit} outside 1..={n}"
            )));
        }
        let mut letters = vec![Pauli::I; n];
        letters[qubit - 1] = letter;
        Ok(Self::new(letters, 0))
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn letter(&self, qubit0: usize) -> Pauli {
        self.letters[qubit0]
    }

    /// Exponent `e` of the global phase `i^e`.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn phase_value(&self) -> Complex64 {
        match self.phase {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// 0-based indices of non-identity letters.
    pub fn support(&self) -> Vec<usize> {
        (0..self.letters.len())
            .filter(|&q| self.letters[q] != Pauli::I)
            .collect()
    }

    fn y_count(&self) -> usize {
        self.letters.iter().filter(|&&p| p == Pauli::Y).count()
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.letters.clone(), (4 - self.phase) % 4)
    }

    /// Each Y contributes a sign under transposition.
    pub fn transpose(&self) -> Self {
        let flip = if self.y_count() % 2 == 1 { 2 } else { 0 };
        Self::new(self.letters.clone(), self.phase + flip)
    }

    pub fn conj(&self) -> Self {
        self.adjoint().transpose()
    }

    pub fn negate(&self) -> Self {
        Self::new(self.letters.clone(), self.phase + 2)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.num_qubits() != other.num_qubits() {
            return Err(OtocError::DimensionMismatch(format!(
                "Pauli product on {} and {} qubits",
                self.num_qubits(),
                other.num_qubits()
            )));
        }
        let mut phase = self.phase + other.phase;
        let letters = self
            .letters
            .iter()
            .zip(&other.letters)
            .map(|(&a, &b)| {
                let (e, p) = a.mul(b);
                phase += e;
                p
            })
            .collect();
        Ok(Self::new(letters, phase))
    }

    /// `self ⊗ other`
    pub fn tensor(&self, other: &Self) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self::new(letters, self.phase + other.phase)
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        let anti = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }

    /// Dense `2^n × 2^n` matrix.
    pub fn matrix(&self) -> DenseOperator {
        let mut m = DenseOperator::zeros(1 << self.letters.len());
        for (col, (row, val)) in self.columns().into_iter().enumerate() {
            m[(row, col)] = val;
        }
        m
    }
}

impl PauliString {
    /// Column `c` of the matrix has its single non-zero entry at
    /// `(row, value)`.
    pub fn columns(&self) -> Vec<(usize, Complex64)> {
        let n = self.letters.len();
        let xmask = self
            .letters
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips())
            .fold(0usize, |acc, (q, _)| acc | 1 << (n - 1 - q));
        let phase = self.phase_value();
        (0..1usize << n)
            .map(|col| {
                let mut val = phase;
                for (q, &p) in self.letters.iter().enumerate() {
                    let bit = (col >> (n - 1 - q)) & 1;
                    val *= p.matrix()[bit ^ usize::from(p.flips())][bit];
                }
                (col ^ xmask, val)
            })
            .collect()
    }

    /// `P·M` by row permutation.
    pub fn left_mul(&self, m: &DenseOperator) -> Result<DenseOperator> {
        self.check_dim(m)?;
        let cols = self.columns();
        let dim = m.dim();
        let mut out = DenseOperator::zeros(dim);
        for (c, &(row, val)) in cols.iter().enumerate() {
            for j in 0..dim {
                out[(row, j)] = val * m[(c, j)];
            }
        }
        Ok(out)
    }

    /// `M·P` by column permutation.
    pub fn right_mul(&self, m: &DenseOperator) -> Result<DenseOperator> {
        self.check_dim(m)?;
        let cols = self.columns();
        let dim = m.dim();
        let mut out = DenseOperator::zeros(dim);
        for r in 0..dim {
            for (c, &(row, val)) in cols.iter().enumerate() {
                out[(r, c)] = m[(r, row)] * val;
            }
        }
        Ok(out)
    }

    fn check_dim(&self, m: &DenseOperator) -> Result<()> {
        if m.dim() != 1 << self.letters.len() {
            return Err(OtocError::DimensionMismatch(format!(
                "{}-qubit Pauli string against a {}-dimensional operator",
                self.letters.len(),
                m.dim()
            )));
        }
        Ok(())
    }
}

/// Dense matrix of a Pauli string.
pub fn pauli_matrix(p: &PauliString) -> DenseOperator {
    p.matrix()
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        let letters: String = self.letters.iter().map(|p| p.as_char()).collect();
        write!(f, "{prefix}{letters}")
    }
}

impl FromStr for PauliString {
    type Err = OtocError;

    /// Accepts an optional `+`, `-`, `i`, `+i` or `-i` prefix followed by
    /// letters from `IXYZ`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, rest) = if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix("+i") {
            (1, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0, r)
        } else if let Some(r) = s.strip_prefix('i') {
            (1, r)
        } else {
            (0, s)
        };
        if rest.is_empty() {
            return Err(OtocError::Parse(format!("empty Pauli string {s:?}")));
        }
        let letters = rest
            .chars()
            .map(|ch| match ch {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(OtocError::Parse(format!(
                    "unexpected character {other:?} in Pauli string {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(letters, phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::dense::kron;
    use proptest::prelude::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn letter_strategy() -> impl Strategy<Value = Pauli> {
        prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
    }

    fn pauli_strategy(n: usize) -> impl Strategy<Value = PauliString> {
        (proptest::collection::vec(letter_strategy(), n), 0u8..4)
            .prop_map(|(l, ph)| PauliString::new(l, ph))
    }

    #[test]
    fn zi_is_z_kron_i() {
        let z = p("Z").matrix();
        let i = DenseOperator::identity(2);
        assert_eq!(p("ZI").matrix(), kron(&z, &i));
    }

    #[test]
    fn xx_squares_to_identity() {
        let xx = p("XX").matrix();
        assert_eq!(xx.matmul(&xx).unwrap(), DenseOperator::identity(4));
    }

    #[test]
    fn y_matrix_and_parse_round_trip() {
        let y = p("Y").matrix();
        assert_eq!(y[(0, 1)], -I);
        assert_eq!(y[(1, 0)], I);
        for s in ["XYZ", "-ZZ", "iX", "-iYI"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("".parse::<PauliString>().is_err());
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn transpose_and_conj_signs() {
        assert_eq!(p("Y").transpose(), p("-Y"));
        assert_eq!(p("YY").transpose(), p("YY"));
        assert_eq!(p("iX").conj(), p("-iX"));
        assert_eq!(p("ZX").transpose(), p("ZX"));
    }

    #[test]
    fn single_qubit_products() {
        assert_eq!(p("X").mul(&p("Y")).unwrap(), p("iZ"));
        assert_eq!(p("Y").mul(&p("X")).unwrap(), p("-iZ"));
        assert!(p("XI").commutes_with(&p("IZ")));
        assert!(!p("XI").commutes_with(&p("ZZ")));
    }

    proptest! {
        #[test]
        fn matrices_are_unitary_and_involutory(l in proptest::collection::vec(letter_strategy(), 1..=4)) {
            let m = PauliString::new(l.clone(), 0).matrix();
            prop_assert!(m.is_unitary(1e-12));
            prop_assert!(m.matmul(&m).unwrap().distance(&DenseOperator::identity(m.dim())).unwrap() < 1e-12);
            if l.iter().any(|&x| x != Pauli::I) {
                prop_assert!(m.trace().norm() < 1e-12);
            }
        }

        #[test]
        fn symbolic_ops_match_dense(a in pauli_strategy(3), b in pauli_strategy(3)) {
            let (ma, mb) = (a.matrix(), b.matrix());
            prop_assert!(a.mul(&b).unwrap().matrix().distance(&ma.matmul(&mb).unwrap()).unwrap() < 1e-12);
            prop_assert!(a.transpose().matrix().distance(&ma.transpose()).unwrap() < 1e-12);
            prop_assert!(a.conj().matrix().distance(&ma.conj()).unwrap() < 1e-12);
            prop_assert!(a.adjoint().matrix().distance(&ma.adjoint()).unwrap() < 1e-12);
            prop_assert_eq!(a.is_hermitian(), ma.is_hermitian(1e-12));
            prop_assert!(a.tensor(&b).matrix().distance(&kron(&ma, &mb)).unwrap() < 1e-12);
            prop_assert!(a.left_mul(&mb).unwrap().distance(&ma.matmul(&mb).unwrap()).unwrap() < 1e-12);
            prop_assert!(a.right_mul(&mb).unwrap().distance(&mb.matmul(&ma).unwrap()).unwrap() < 1e-12);
        }
    }
}
