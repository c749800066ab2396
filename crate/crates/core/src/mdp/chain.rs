use super::{Mdp, PositionalPolicy};
use crate::error::Result;
use crate::graph::{backward_reachable, bottom_sccs};
use crate::linalg::{solve, Matrix};
use crate::scalar::Real;

/// A finite Markov chain with sparse rows. Used as the common evaluation
/// target once a policy has been fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain<R = f64> {
    rows: Vec<Vec<(usize, R)>>,
}

impl<R: Real> MarkovChain<R> {
    /// Rows are taken as given; entries with zero probability are dropped.
    pub fn from_rows(mut rows: Vec<Vec<(usize, R)>>) -> Self {
        for row in &mut rows {
            row.retain(|e| e.1 > R::zero());
        }
        Self { rows }
    }

    /// The chain induced on `mdp` by a positional policy.
    pub fn induced(mdp: &Mdp<R>, policy: &PositionalPolicy<R>) -> Self {
        assert_eq!(policy.num_states(), mdp.num_states(), "policy/MDP state count mismatch");
        let rows = (0..mdp.num_states())
            .map(|s| {
                let mut dense: Vec<(usize, R)> = Vec::new();
                for a in 0..mdp.num_actions() {
                    let w = policy.prob(s, a);
                    if w == R::zero() {
                        continue;
                    }
                    for &(t, p) in mdp.row(s, a) {
                        match dense.iter_mut().find(|e| e.0 == t) {
                            Some(e) => e.1 = e.1 + w * p,
                            None => dense.push((t, w * p)),
                        }
                    }
                }
                dense.sort_by_key(|e| e.0);
                dense
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Like [`MarkovChain::induced`], but states outside `active` are made
    /// absorbing.
    pub fn induced_on(mdp: &Mdp<R>, policy: &PositionalPolicy<R>, active: &[bool]) -> Self {
        let mut chain = Self::induced(mdp, policy);
        for (s, row) in chain.rows.iter_mut().enumerate() {
            if !active[s] {
                *row = vec![(s, R::one())];
            }
        }
        chain
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, s: usize) -> &[(usize, R)] {
        &self.rows[s]
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows.iter().map(|r| r.iter().map(|e| e.0).collect()).collect()
    }

    /// Closed recurrent classes, each sorted, in order of smallest member.
    pub fn recurrent_classes(&self) -> Vec<Vec<usize>> {
        bottom_sccs(&self.adjacency())
    }

    /// Probability of eventually visiting `target` from each state.
    pub fn reach_probability(&self, target: &[bool]) -> Result<Vec<R>> {
        let n = self.num_states();
        let can = backward_reachable(&self.adjacency(), target);
        let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !target[s]).collect();
        let mut out: Vec<R> = (0..n).map(|s| if target[s] { R::one() } else { R::zero() }).collect();
        let solved = self.harmonic(&unknown, &out)?;
        for (&s, v) in unknown.iter().zip(solved) {
            out[s] = v.clamp01();
        }
        Ok(out)
    }

    /// Solves `x(s) = Σ P(s, t) x(t)` on the `unknown` states, with `fixed`
    /// supplying the values everywhere else.
    fn harmonic(&self, unknown: &[usize], fixed: &[R]) -> Result<Vec<R>> {
        let n = self.num_states();
        let mut index = vec![usize::MAX; n];
        for (i, &s) in unknown.iter().enumerate() {
            index[s] = i;
        }
        let k = unknown.len();
        let mut a = Matrix::identity(k);
        let mut b = vec![R::zero(); k];
        for (i, &s) in unknown.iter().enumerate() {
            for &(t, p) in &self.rows[s] {
                if index[t] != usize::MAX {
                    a[(i, index[t])] = a[(i, index[t])] - p;
                } else {
                    b[i] = b[i] + p * fixed[t];
                }
            }
        }
        solve(&a, &b)
    }

    /// Stationary distribution of a closed irreducible class, aligned with
    /// `class`.
    pub fn stationary(&self, class: &[usize]) -> Result<Vec<R>> {
        let k = class.len();
        let mut index = vec![usize::MAX; self.num_states()];
        for (i, &s) in class.iter().enumerate() {
            index[s] = i;
        }
        // Rows of (P - I)^T, with the last equation replaced by Σx = 1.
        let mut a = Matrix::zeros(k);
        for (i, &s) in class.iter().enumerate() {
            a[(i, i)] = a[(i, i)] - R::one();
            for &(t, p) in &self.rows[s] {
                let j = index[t];
                debug_assert!(j != usize::MAX, "class is not closed");
                a[(j, i)] = a[(j, i)] + p;
            }
        }
        let mut b = vec![R::zero(); k];
        for j in 0..k {
            a[(k - 1, j)] = R::one();
        }
        b[k - 1] = R::one();
        let x = solve(&a, &b)?;
        Ok(x.into_iter().map(|v| v.max(R::zero())).collect())
    }

    /// Long-run average of the per-state expected reward `reward`, from each
    /// state.
    pub fn gains(&self, reward: &[R]) -> Result<Vec<R>> {
        let n = self.num_states();
        let mut in_class = vec![false; n];
        let mut out = vec![R::zero(); n];
        for class in self.recurrent_classes() {
            let pi = self.stationary(&class)?;
            let g: R = class.iter().zip(&pi).map(|(&s, &x)| x * reward[s]).sum();
            for &s in &class {
                in_class[s] = true;
                out[s] = g;
            }
        }
        let transient: Vec<usize> = (0..n).filter(|&s| !in_class[s]).collect();
        let solved = self.harmonic(&transient, &out)?;
        for (&s, v) in transient.iter().zip(solved) {
            out[s] = v;
        }
        Ok(out)
    }

    /// Probability that the run visits `accepting` infinitely often, i.e. is
    /// absorbed in a recurrent class meeting `accepting`.
    pub fn buchi_probability(&self, accepting: &[bool]) -> Result<Vec<R>> {
        let mut good = vec![false; self.num_states()];
        for class in self.recurrent_classes() {
            if class.iter().any(|&s| accepting[s]) {
                for s in class {
                    good[s] = true;
                }
            }
        }
        self.reach_probability(&good)
    }

    /// Solves `v = r + Γ P v` for a per-state discount.
    pub fn discounted(&self, reward: &[R], gamma: impl Fn(usize) -> R) -> Result<Vec<R>> {
        let n = self.num_states();
        let mut a = Matrix::identity(n);
        for s in 0..n {
            let g = gamma(s);
            for &(t, p) in &self.rows[s] {
                a[(s, t)] = a[(s, t)] - g * p;
            }
        }
        solve(&a, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(rows: Vec<Vec<(usize, f64)>>) -> MarkovChain<f64> {
        MarkovChain::from_rows(rows)
    }

    #[test]
    fn two_cycle_gain() {
        let c = chain(vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
        let g = c.gains(&[1.0, 0.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absorption_mixes_class_gains() {
        // 0 -> 1 (0.25) or 2 (0.75); 1 and 2 absorbing with rewards 1 and 0.
        let c = chain(vec![vec![(1, 0.25), (2, 0.75)], vec![(1, 1.0)], vec![(2, 1.0)]]);
        let g = c.gains(&[0.0, 1.0, 0.0]).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-12);
        let r = c.reach_probability(&[false, true, false]).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-12);
        assert_eq!(r[2], 0.0);
        let b = c.buchi_probability(&[false, false, true]).unwrap();
        assert!((b[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_asymmetric_cycle() {
        let c = chain(vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 1.0)]]);
        let pi = c.stationary(&[0, 1]).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_discounting() {
        let c = chain(vec![vec![(0, 1.0)]]);
        let v = c.discounted(&[1.0], |_| 0.5).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
    }
}
