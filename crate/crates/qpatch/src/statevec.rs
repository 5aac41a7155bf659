//! Dense statevector simulator for small registers.
//!
//! Bit-ordering convention: qubit 0 addresses the **most significant** bit of
//! the computational-basis index. A register built by [`StateVector::tensor`]
//! therefore places the left factor on the lower qubit indices, and amplitude
//! encoding of a row-major flattened patch reads pixels in raster order.
//!
//! All gates here are real-valued (RY, CNOT, CSWAP, Hadamard); amplitudes are
//! stored as `Complex64` anyway so the register type is general.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Largest register the simulator will allocate. The biggest circuit used by
/// the autoencoder pipeline (P=8 test circuit) needs 6+6+1 = 13 qubits.
pub const MAX_QUBITS: usize = 14;

#[derive(Clone, Debug)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0...0⟩ on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "register size {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Amplitude-encode a real vector: amplitudes = values / ||values||.
    pub fn from_amplitudes(values: &[f64], n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "register size {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        if values.len() != 1 << n_qubits {
            return Err(Error::Dimension(format!(
                "expected {} amplitudes for {} qubits, got {}",
                1usize << n_qubits,
                n_qubits,
                values.len()
            )));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate("zero-norm amplitude vector".into()));
        }
        let amplitudes = values
            .iter()
            .map(|v| Complex64::new(v / norm, 0.0))
            .collect();
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Argument(format!(
                "qubit index {q} out of range for {}-qubit register",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Bit mask selecting qubit `q` in a basis index (qubit 0 = MSB).
    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Y-rotation: [[cos(θ/2), −sin(θ/2)], [sin(θ/2), cos(θ/2)]].
    pub fn apply_ry(&mut self, q: usize, theta: f64) -> Result<()> {
        self.check_qubit(q)?;
        let (s, c) = (theta / 2.0).sin_cos();
        let m = self.mask(q);
        for i in 0..self.amplitudes.len() {
            if i & m == 0 {
                let j = i | m;
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[j];
                self.amplitudes[i] = c * a0 - s * a1;
                self.amplitudes[j] = s * a0 + c * a1;
            }
        }
        Ok(())
    }

    pub fn apply_hadamard(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let m = self.mask(q);
        for i in 0..self.amplitudes.len() {
            if i & m == 0 {
                let j = i | m;
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[j];
                self.amplitudes[i] = (a0 + a1) * inv_sqrt2;
                self.amplitudes[j] = (a0 - a1) * inv_sqrt2;
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Argument("cnot control equals target".into()));
        }
        let cm = self.mask(control);
        let tm = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amplitudes.swap(i, i | tm);
            }
        }
        Ok(())
    }

    /// Controlled swap of qubits `a` and `b`.
    pub fn apply_cswap(&mut self, control: usize, a: usize, b: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if control == a || control == b || a == b {
            return Err(Error::Argument("cswap indices must be pairwise distinct".into()));
        }
        let cm = self.mask(control);
        let am = self.mask(a);
        let bm = self.mask(b);
        for i in 0..self.amplitudes.len() {
            if i & cm != 0 && i & am != 0 && i & bm == 0 {
                self.amplitudes.swap(i, i ^ (am | bm));
            }
        }
        Ok(())
    }

    /// ⟨σz⟩ on qubit `q`: P(bit = 0) − P(bit = 1).
    pub fn expect_z(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let m = self.mask(q);
        let mut acc = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if i & m == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        Ok(acc)
    }

    /// P(measuring |0⟩ on qubit `q`) = (1 + ⟨σz⟩)/2.
    pub fn prob_zero(&self, q: usize) -> Result<f64> {
        Ok((1.0 + self.expect_z(q)?) / 2.0)
    }

    /// Shot-sampled estimate of `prob_zero` (seeded binomial draw). Exact
    /// expectations are the default everywhere; this exists for realism
    /// studies only.
    pub fn sample_prob_zero<R: Rng>(&self, q: usize, shots: u32, rng: &mut R) -> Result<f64> {
        let p = self.prob_zero(q)?;
        if shots == 0 {
            return Err(Error::Argument("shots must be positive".into()));
        }
        let mut hits = 0u32;
        for _ in 0..shots {
            if rng.gen::<f64>() < p {
                hits += 1;
            }
        }
        Ok(f64::from(hits) / f64::from(shots))
    }

    /// Kronecker product; `self` occupies the lower qubit indices (MSB side).
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "tensor product would need {n} qubits (cap {MAX_QUBITS})"
            )));
        }
        let db = other.amplitudes.len();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (ka, a) in self.amplitudes.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (kb, b) in other.amplitudes.iter().enumerate() {
                amplitudes[ka * db + kb] = a * b;
            }
        }
        Ok(StateVector { n_qubits: n, amplitudes })
    }

    /// Project qubit `q` onto |0⟩ and renormalize (post-selection). Used by
    /// the optional reset-trash-before-decode path. No-op renormalization if
    /// the projected norm vanishes.
    pub fn project_zero(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let m = self.mask(q);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & m != 0 {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let norm = self.norm();
        if norm > 0.0 {
            for a in &mut self.amplitudes {
                *a /= norm;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn re(s: &StateVector) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn from_amplitudes_basis_uniform_and_345() {
        let s = StateVector::from_amplitudes(&[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(re(&s), vec![1.0, 0.0, 0.0, 0.0]);
        let s = StateVector::from_amplitudes(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        for a in re(&s) {
            assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        }
        let s = StateVector::from_amplitudes(&[3.0, 4.0, 0.0, 0.0], 2).unwrap();
        assert_abs_diff_eq!(re(&s)[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(re(&s)[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn from_amplitudes_errors() {
        assert!(matches!(
            StateVector::from_amplitudes(&[1.0, 0.0, 0.0], 2),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            StateVector::from_amplitudes(&[0.0, 0.0], 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn ry_identity_pi_and_half() {
        let mut s = StateVector::from_amplitudes(&[0.6, 0.8], 1).unwrap();
        s.apply_ry(0, 0.0).unwrap();
        assert_abs_diff_eq!(re(&s)[0], 0.6, epsilon = 1e-15);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(re(&s)[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(re(&s)[1], 1.0, epsilon = 1e-15);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(re(&s)[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(re(&s)[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn cnot_truth_table_and_entangler() {
        // |10⟩ → |11⟩ with control = qubit 0 (MSB).
        let mut s = StateVector::from_amplitudes(&[0.0, 0.0, 1.0, 0.0], 2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(re(&s), vec![0.0, 0.0, 0.0, 1.0]);

        let mut s = StateVector::zero(2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(re(&s)[0], 1.0);

        // (|00⟩+|10⟩)/√2 → (|00⟩+|11⟩)/√2
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut s = StateVector::from_amplitudes(&[1.0, 0.0, 1.0, 0.0], 2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_abs_diff_eq!(re(&s)[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(re(&s)[3], r, epsilon = 1e-15);

        assert!(matches!(s.apply_cnot(1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn cswap_cases() {
        // |1⟩|01⟩ → |1⟩|10⟩: basis index 0b101 → 0b110.
        let mut v = vec![0.0; 8];
        v[0b101] = 1.0;
        let mut s = StateVector::from_amplitudes(&v, 3).unwrap();
        s.apply_cswap(0, 1, 2).unwrap();
        assert_eq!(re(&s)[0b110], 1.0);

        // control off: |0⟩|01⟩ unchanged.
        let mut v = vec![0.0; 8];
        v[0b001] = 1.0;
        let mut s = StateVector::from_amplitudes(&v, 3).unwrap();
        s.apply_cswap(0, 1, 2).unwrap();
        assert_eq!(re(&s)[0b001], 1.0);

        // swap of equal bits: |1⟩|11⟩ unchanged.
        let mut v = vec![0.0; 8];
        v[0b111] = 1.0;
        let mut s = StateVector::from_amplitudes(&v, 3).unwrap();
        s.apply_cswap(0, 1, 2).unwrap();
        assert_eq!(re(&s)[0b111], 1.0);

        assert!(matches!(s.apply_cswap(0, 0, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn hadamard_and_involution() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut s = StateVector::zero(1).unwrap();
        s.apply_hadamard(0).unwrap();
        assert_abs_diff_eq!(re(&s)[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(re(&s)[1], r, epsilon = 1e-15);

        let mut s = StateVector::from_amplitudes(&[0.0, 1.0], 1).unwrap();
        s.apply_hadamard(0).unwrap();
        assert_abs_diff_eq!(re(&s)[1], -r, epsilon = 1e-15);

        let mut s = StateVector::from_amplitudes(&[0.28, -0.96], 1).unwrap();
        let before = re(&s);
        s.apply_hadamard(0).unwrap();
        s.apply_hadamard(0).unwrap();
        for (a, b) in re(&s).iter().zip(&before) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn expect_z_and_prob_zero() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.expect_z(0).unwrap(), 1.0);
        assert_eq!(s.prob_zero(0).unwrap(), 1.0);
        let s = StateVector::from_amplitudes(&[0.0, 1.0], 1).unwrap();
        assert_eq!(s.expect_z(0).unwrap(), -1.0);
        assert_eq!(s.prob_zero(0).unwrap(), 0.0);
        let s = StateVector::from_amplitudes(&[1.0, 1.0], 1).unwrap();
        assert_abs_diff_eq!(s.expect_z(0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.prob_zero(0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn tensor_examples() {
        let a = StateVector::zero(1).unwrap();
        let b = StateVector::from_amplitudes(&[0.0, 1.0], 1).unwrap();
        let t = a.tensor(&b).unwrap();
        assert_eq!(re(&t), vec![0.0, 1.0, 0.0, 0.0]); // |01⟩

        let plus = StateVector::from_amplitudes(&[1.0, 1.0], 1).unwrap();
        let t = plus.tensor(&a).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(re(&t)[0b00], r, epsilon = 1e-15);
        assert_abs_diff_eq!(re(&t)[0b10], r, epsilon = 1e-15);
        assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-12);

        let big = StateVector::zero(8).unwrap();
        assert!(matches!(big.tensor(&big), Err(Error::Capacity(_))));
    }

    fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
                return v;
            }
        }
    }

    #[test]
    fn norm_preserved_and_ry_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..=4usize);
            let v = random_unit(&mut rng, 1 << n);
            let mut s = StateVector::from_amplitudes(&v, n).unwrap();
            let before = re(&s);
            let q = rng.gen_range(0..n);
            let theta = rng.gen_range(-6.0..6.0);
            s.apply_ry(q, theta).unwrap();
            assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-10);
            s.apply_ry(q, -theta).unwrap();
            for (a, b) in re(&s).iter().zip(&before) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    /// Hadamard–CSWAP–Hadamard on an ancilla measures (1 + |⟨u,v⟩|²)/2.
    #[test]
    fn swap_test_matches_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4usize {
            for _ in 0..25 {
                let u = random_unit(&mut rng, 1 << n);
                let v = random_unit(&mut rng, 1 << n);
                let su = StateVector::from_amplitudes(&u, n).unwrap();
                let sv = StateVector::from_amplitudes(&v, n).unwrap();
                let mut reg = su.tensor(&sv).unwrap().tensor(&StateVector::zero(1).unwrap()).unwrap();
                let anc = 2 * n;
                reg.apply_hadamard(anc).unwrap();
                for q in 0..n {
                    reg.apply_cswap(anc, q, n + q).unwrap();
                }
                reg.apply_hadamard(anc).unwrap();
                let p0 = reg.prob_zero(anc).unwrap();

                let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv);
                assert_abs_diff_eq!(p0, (1.0 + dot * dot) / 2.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sample_prob_zero_is_seeded() {
        let s = StateVector::from_amplitudes(&[1.0, 1.0], 1).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = s.sample_prob_zero(0, 128, &mut r1).unwrap();
        let b = s.sample_prob_zero(0, 128, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }
}
