use super::{check_len, Mlp, MlpGrads, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 3e-4;

/// Adam moments for one parameter set, with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize], learning_rate: f64) -> Self {
        Self {
            first_moment: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn for_mlp(net: &Mlp, learning_rate: f64) -> Self {
        let lens: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        Self::new(&lens, learning_rate)
    }

    /// One bias-corrected Adam step over matching parameter/gradient tensors.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_len("adam tensors", self.first_moment.len(), params.len())?;
        check_len("adam gradients", self.first_moment.len(), grads.len())?;
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            check_len("adam parameter", m.len(), p.len())?;
            check_len("adam gradient", m.len(), g.len())?;
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((p, &g), m), v) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_mlp(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        let g = grads.slices();
        let mut p = net.param_slices_mut();
        self.step(&mut p, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = AdamState::new(&[2], 0.1);
        adam.first_moment[0] = vec![0.5, -0.5];
        adam.second_moment[0] = vec![0.25, 0.25];
        adam.step_count = 3;
        let mut w = [1.0, 2.0];
        // nonzero history still moves parameters; a fresh state must not
        let mut fresh = AdamState::new(&[2], 0.1);
        let mut w2 = [1.0, 2.0];
        fresh.step(&mut [&mut w2[..]], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(w2, [1.0, 2.0]);
        adam.step(&mut [&mut w[..]], &[&[0.0, 0.0]]).unwrap();
        assert!(adam.first_moment[0][0].abs() < 0.5);
        assert!(adam.second_moment[0][0] < 0.25);
        assert_eq!(adam.step_count, 4);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.7, -0.02, 1e3] {
            let mut adam = AdamState::new(&[1], 0.01);
            let mut w = [0.0];
            adam.step(&mut [&mut w[..]], &[&[g]]).unwrap();
            assert!((w[0] + 0.01 * g.signum()).abs() < 1e-7, "g={g} w={}", w[0]);
        }
    }

    #[test]
    fn quadratic_trajectory_matches_recurrence() {
        // f(w) = w², w0 = 1, lr = 0.1; the recurrences evaluated by hand:
        // step 1: g=2, m=0.2, v=0.004, m̂=2, v̂=4 → w = 1 - 0.1·2/(2+1e-8)
        let w1: f64 = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        // step 2: g=2·w1
        let g2 = 2.0 * w1;
        let m2 = 0.9 * 0.2 + 0.1 * g2;
        let v2: f64 = 0.999 * 0.004 + 0.001 * g2 * g2;
        let w2 = w1 - 0.1 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.998001)).sqrt() + 1e-8);

        let mut adam = AdamState::new(&[1], 0.1);
        let mut w = [1.0];
        for _ in 0..2 {
            let g = 2.0 * w[0];
            adam.step(&mut [&mut w[..]], &[&[g]]).unwrap();
        }
        assert!((w[0] - w2).abs() < 1e-15, "{} vs {}", w[0], w2);
        assert!((w1 - 0.9).abs() < 1e-8);
        assert_eq!(adam.step_count, 2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut adam = AdamState::new(&[2], 0.1);
        let mut w = [0.0];
        assert!(adam.step(&mut [&mut w[..]], &[&[1.0]]).is_err());
        assert_eq!(adam.step_count, 0);
    }
}
