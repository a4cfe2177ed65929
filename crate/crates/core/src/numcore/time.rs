/// Explicit Runge–Kutta scheme in Shu–Osher form.
///
/// Stage `s` is `u^(s) = sum_r rho[s][r] u^(r) + dt sum_r theta[s][r] L(u^(r))`
/// with `u^(0) = u^n`; the last stage is the new state.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeScheme {
    pub rho: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

impl TimeScheme {
    pub fn ssprk22() -> Self {
        Self { rho: vec![vec![1.0], vec![0.5, 0.5]], theta: vec![vec![1.0], vec![0.0, 0.5]] }
    }

    pub fn forward_euler() -> Self {
        Self { rho: vec![vec![1.0]], theta: vec![vec![1.0]] }
    }

    pub fn stages(&self) -> usize {
        self.rho.len()
    }

    /// Time offsets (in units of dt) of the stage values `u^(0)..u^(S-1)`.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut c = vec![0.0];
        for s in 0..self.stages() - 1 {
            let cs = self.rho[s].iter().zip(&c).map(|(r, cr)| r * cr).sum::<f64>() + self.theta[s].iter().sum::<f64>();
            c.push(cs);
        }
        c
    }
}
