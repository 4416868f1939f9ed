//! Mean absorption time of the failure/repair chain, by direct linear solve.
//!
//! State `m` counts missing units. From `m` the chain moves to `m + 1` at
//! rate `(n - m) * lambda` and to `m - 1` at rate `m * mu`; reaching
//! `r + 1` is absorbing. The expected time to absorption `T` satisfies
//! `-Q T = 1` over the transient states, which is solved here by Gaussian
//! elimination without using any closed form.

use ecsim::Scalar;

fn count<T: Scalar>(n: usize) -> T {
    T::from_count(n)
}

/// Expected time to absorption from every transient state.
pub fn absorption_times<T: Scalar>(n: usize, r: usize, lambda: &T, mu: &T) -> Vec<T> {
    let size = r + 1;
    // Rows of the augmented system [-Q | 1].
    let mut a: Vec<Vec<T>> = vec![vec![T::zero(); size + 1]; size];
    for m in 0..size {
        let fail = count::<T>(n - m) * lambda.clone();
        let repair = count::<T>(m) * mu.clone();
        a[m][m] = fail.clone() + repair.clone();
        if m + 1 < size {
            a[m][m + 1] = T::zero() - fail;
        }
        if m > 0 {
            a[m][m - 1] = T::zero() - repair;
        }
        a[m][size] = T::one();
    }
    for col in 0..size {
        let pivot = (col..size).find(|row| a[*row][col] != T::zero()).expect("nonsingular chain");
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x = x.clone() / p.clone();
        }
        for row in 0..size {
            if row != col && a[row][col] != T::zero() {
                let f = a[row][col].clone();
                for j in 0..=size {
                    let v = a[col][j].clone();
                    a[row][j] = a[row][j].clone() - f.clone() * v;
                }
            }
        }
    }
    a.into_iter().map(|row| row[size].clone()).collect()
}

/// MTTDL starting from a complete stripe.
pub fn mttdl<T: Scalar>(n: usize, r: usize, lambda: &T, mu: &T) -> T {
    absorption_times(n, r, lambda, mu).swap_remove(0)
}
