//! Exact rational route for the noncompliance estimators under weights
//! `n_1k + n_2k`. Second moments go through the sample covariance of the
//! `w~_k D_k` series scaled by `m / n^2`, not the centered sum.

use mpcr_core::model::{MpcrDataset, Slot};
use num_rational::Ratio;

pub type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactCace {
    pub psi: Q,
    pub tau: Q,
    pub var_y: Q,
    pub var_r: Q,
    pub nu: Q,
    /// `None` when `tau` is zero.
    pub gamma: Option<Q>,
    pub gamma_variance: Option<Q>,
}

/// Integer-valued outcome; panics otherwise.
fn q(x: f64) -> Q {
    assert!(x.fract() == 0.0, "rational oracle needs integer outcomes, got {x}");
    Q::from_integer(x as i128)
}

fn mean(xs: &[Q]) -> Q {
    xs.iter().cloned().fold(Q::from_integer(0), |a, b| a + b) / Q::from_integer(xs.len() as i128)
}

fn cov(a: &[Q], b: &[Q]) -> Q {
    let (ma, mb) = (mean(a), mean(b));
    let s = a
        .iter()
        .zip(b)
        .fold(Q::from_integer(0), |acc, (x, y)| acc + (x - ma) * (y - mb));
    s / Q::from_integer(a.len() as i128 - 1)
}

pub fn exact_cace(ds: &MpcrDataset) -> ExactCace {
    let m = ds.m() as i128;
    let n = Q::from_integer(ds.n() as i128);
    let total_w = Q::from_integer(ds.pairs().iter().map(|p| p.sample_size() as i128).sum());
    let mut wy = Vec::new();
    let mut wr = Vec::new();
    for p in ds.pairs() {
        let arm = |slot: Slot| {
            let c = p.cluster(slot);
            let ys: Vec<Q> = c.outcomes().iter().map(|&y| q(y)).collect();
            let rs: Vec<Q> = c
                .receipts()
                .expect("receipts")
                .iter()
                .map(|&r| Q::from_integer(r as i128))
                .collect();
            (mean(&ys), mean(&rs))
        };
        let treated = p.treated_slot();
        let (yt, rt) = arm(treated);
        let (yc, rc) = arm(treated.other());
        let w_tilde = n * Q::from_integer(p.sample_size() as i128) / total_w;
        wy.push(w_tilde * (yt - yc));
        wr.push(w_tilde * (rt - rc));
    }
    let mq = Q::from_integer(m);
    let psi = mean(&wy) * mq / n;
    let tau = mean(&wr) * mq / n;
    let scale = mq / (n * n);
    let var_y = scale * cov(&wy, &wy);
    let var_r = scale * cov(&wr, &wr);
    let nu = scale * cov(&wy, &wr);
    let identified = *tau.numer() != 0;
    let gamma = identified.then(|| psi / tau);
    // Gradient of psi / tau is (1 / tau, -psi / tau^2).
    let gamma_variance = identified.then(|| {
        let gy = tau.recip();
        let gr = -psi / (tau * tau);
        gy * gy * var_y + gr * gr * var_r + Q::from_integer(2) * gy * gr * nu
    });
    ExactCace {
        psi,
        tau,
        var_y,
        var_r,
        nu,
        gamma,
        gamma_variance,
    }
}
