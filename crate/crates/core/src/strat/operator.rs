use super::index::MultiIndex;

/// Autonomous vector fields `V_0, ..., V_d` on a scalar state.
pub trait VectorFields {
    fn driving_dim(&self) -> usize;
    /// `V_j(x)`; `j = 0` is the drift.
    fn field(&self, j: usize, x: f64) -> f64;
}

pub type ScalarField<'a> = Box<dyn Fn(f64, f64) -> f64 + 'a>;

fn fd_step(v: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + v.abs())
}

/// `L^α g` by nested central differences, with `L^0 = ∂_t + V_0 ∂_x` and
/// `L^j = V_j ∂_x`. The first letter is applied last.
pub fn apply_l_operator<'a>(
    alpha: &MultiIndex,
    g: ScalarField<'a>,
    fields: &'a dyn VectorFields,
) -> ScalarField<'a> {
    let mut h = g;
    for &letter in alpha.letters().iter().rev() {
        let inner = h;
        h = Box::new(move |t: f64, x: f64| {
            let hx = fd_step(x);
            let dx = (inner(t, x + hx) - inner(t, x - hx)) / (2.0 * hx);
            let mut out = fields.field(letter as usize, x) * dx;
            if letter == 0 {
                let ht = fd_step(t);
                out += (inner(t + ht, x) - inner(t - ht, x)) / (2.0 * ht);
            }
            out
        });
    }
    h
}
