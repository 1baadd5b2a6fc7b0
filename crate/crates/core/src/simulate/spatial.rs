//! Torus geometry and the per-receiver SIR decision.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Square torus with minimum-image distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Torus {
    pub side: f64,
}

impl Torus {
    pub fn new(side: f64) -> Self {
        Self { side }
    }

    /// Maps a coordinate into `[0, side)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let w = if (0.0..self.side).contains(&x) {
            x
        } else if (-self.side..0.0).contains(&x) {
            x + self.side
        } else {
            x.rem_euclid(self.side)
        };
        if w >= self.side {
            0.0
        } else {
            w
        }
    }

    pub fn distance_sq(&self, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
        let dx = torus_gap(ax - bx, self.side);
        let dy = torus_gap(ay - by, self.side);
        dx * dx + dy * dy
    }
}

/// Positions and parameters of the links attempting in the current slot.
#[derive(Debug, Default)]
pub(crate) struct ActiveLinks {
    pub tx_x: Vec<f64>,
    pub tx_y: Vec<f64>,
    pub rx_x: Vec<f64>,
    pub rx_y: Vec<f64>,
    pub power: Vec<f64>,
    pub distance: Vec<f64>,
    pub class: Vec<usize>,
    pub source: Vec<usize>,
}

impl ActiveLinks {
    pub fn clear(&mut self) {
        self.tx_x.clear();
        self.tx_y.clear();
        self.rx_x.clear();
        self.rx_y.clear();
        self.power.clear();
        self.distance.clear();
        self.class.clear();
        self.source.clear();
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    /// Places a transmitter uniformly on the torus with its receiver at
    /// offset `(dx, dy)`.
    #[allow(clippy::too_many_arguments)]
    pub fn push<R: Rng>(&mut self, rng: &mut R, torus: &Torus, class: usize, source: usize, power: f64, dx: f64, dy: f64) {
        let x = rng.random::<f64>() * torus.side;
        let y = rng.random::<f64>() * torus.side;
        self.tx_x.push(x);
        self.tx_y.push(y);
        self.rx_x.push(torus.wrap(x + dx));
        self.rx_y.push(torus.wrap(y + dy));
        self.power.push(power);
        self.distance.push((dx * dx + dy * dy).sqrt());
        self.class.push(class);
        self.source.push(source);
    }

    /// Records a link without geometry, for the mean-field model.
    pub fn push_distance(&mut self, class: usize, source: usize, power: f64, r: f64) {
        self.power.push(power);
        self.distance.push(r);
        self.class.push(class);
        self.source.push(source);
    }
}

/// Path gain `d^{-α}` as a function of the squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PathLoss {
    Quartic,
    General { half_alpha: f64 },
}

impl PathLoss {
    pub fn new(alpha: f64) -> Self {
        if alpha == 4.0 {
            PathLoss::Quartic
        } else {
            PathLoss::General { half_alpha: alpha / 2.0 }
        }
    }

    /// `(d²)^{α/2}`
    #[inline(always)]
    pub fn attenuation(&self, d2: f64) -> f64 {
        match *self {
            PathLoss::Quartic => d2 * d2,
            PathLoss::General { half_alpha } => d2.powf(half_alpha),
        }
    }
}

const LANES: usize = 8;
/// Pairs folded into the lane products before one division per lane.
const BLOCK: usize = 4 * LANES;
/// Squared distances are floored here so coincident points stay finite.
const MIN_D2: f64 = 1e-9;

#[inline(always)]
fn torus_gap(d: f64, side: f64) -> f64 {
    let d = d.abs();
    if side - d < d {
        side - d
    } else {
        d
    }
}

/// Multiplies `Π (1 + k·P_j / att(d²_j))` over a slice of transmitters into
/// `prod`, stopping early once it reaches `limit`. Returns the running product.
/// Each factor is kept as `(att + kP) / att` and divided once per block.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn accumulate_product(
    tx_x: &[f64],
    tx_y: &[f64],
    power: &[f64],
    rx: (f64, f64),
    side: f64,
    k: f64,
    limit: f64,
    mut prod: f64,
    att: impl Fn(f64) -> f64 + Copy,
) -> f64 {
    let (yx, yy) = rx;
    let n = tx_x.len();
    let (tx_y, power) = (&tx_y[..n], &power[..n]);
    let full = n - n % BLOCK;
    let mut i = 0;
    while i < full {
        let mut num = [1.0f64; LANES];
        let mut den = [1.0f64; LANES];
        for j in 0..BLOCK / LANES {
            let b = i + LANES * j;
            let x: &[f64; LANES] = tx_x[b..b + LANES].try_into().unwrap();
            let y: &[f64; LANES] = tx_y[b..b + LANES].try_into().unwrap();
            let p: &[f64; LANES] = power[b..b + LANES].try_into().unwrap();
            for l in 0..LANES {
                let dx = torus_gap(x[l] - yx, side);
                let dy = torus_gap(y[l] - yy, side);
                let a = att((dx * dx + dy * dy).max(MIN_D2));
                num[l] *= a + k * p[l];
                den[l] *= a;
            }
        }
        let mut block = 1.0;
        for l in 0..LANES {
            block *= num[l] / den[l];
        }
        prod *= block;
        if !(prod < limit) {
            return prod;
        }
        i += BLOCK;
    }
    for j in full..n {
        let dx = torus_gap(tx_x[j] - yx, side);
        let dy = torus_gap(tx_y[j] - yy, side);
        let a = att((dx * dx + dy * dy).max(MIN_D2));
        prod *= 1.0 + k * power[j] / a;
    }
    prod
}

/// Success of link `i` decided with its exact conditional probability given
/// the geometry: success iff `u < Π_{j≠i} 1/(1 + θ_i (P_j/P_i)(r_i/d_ij)^α)`.
pub(crate) fn marginalized_success(links: &ActiveLinks, i: usize, torus: &Torus, loss: PathLoss, theta: f64, u: f64) -> bool {
    let r = links.distance[i];
    let k = theta * loss.attenuation(r * r) / links.power[i];
    let limit = 1.0 / u;
    let rx = (links.rx_x[i], links.rx_y[i]);
    let side = torus.side;
    let run = |lo: usize, hi: usize, prod: f64| -> f64 {
        let (xs, ys, ps) = (&links.tx_x[lo..hi], &links.tx_y[lo..hi], &links.power[lo..hi]);
        match loss {
            PathLoss::Quartic => accumulate_product(xs, ys, ps, rx, side, k, limit, prod, |d2| d2 * d2),
            PathLoss::General { half_alpha } => {
                accumulate_product(xs, ys, ps, rx, side, k, limit, prod, move |d2: f64| d2.powf(half_alpha))
            }
        }
    };
    let prod = run(0, i, 1.0);
    if !(prod < limit) {
        return false;
    }
    run(i + 1, links.len(), prod) < limit
}

/// Success of link `i` with explicit `Exp(1)` fading on every pair.
pub(crate) fn sampled_success<R: Rng>(
    links: &ActiveLinks,
    i: usize,
    torus: &Torus,
    loss: PathLoss,
    theta: f64,
    rng: &mut R,
) -> bool {
    let r = links.distance[i];
    let h0: f64 = Exp1.sample(rng);
    let budget = h0 * links.power[i] / loss.attenuation(r * r) / theta;
    let (yx, yy) = (links.rx_x[i], links.rx_y[i]);
    let mut interference = 0.0;
    for j in (0..links.len()).filter(|&j| j != i) {
        let d2 = torus.distance_sq(links.tx_x[j], links.tx_y[j], yx, yy);
        let h: f64 = Exp1.sample(rng);
        interference += links.power[j] * h / loss.attenuation(d2);
        if interference >= budget {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimum_image_distances() {
        let t = Torus::new(10.0);
        assert!((t.distance_sq(0.5, 0.5, 9.5, 9.5) - 2.0).abs() < 1e-12);
        assert!((t.distance_sq(1.0, 1.0, 4.0, 5.0) - 25.0).abs() < 1e-12);
        assert!(t.distance_sq(0.0, 0.0, 5.0, 5.0) <= 50.0 + 1e-12);
        assert_eq!(t.wrap(-0.5), 9.5);
        assert_eq!(t.wrap(10.0), 0.0);
        assert!(t.wrap(-1e-18) < 10.0);
    }

    fn two_links(gap: f64) -> ActiveLinks {
        let mut l = ActiveLinks::default();
        for (x, class) in [(0.0, 0usize), (gap, 1)] {
            l.tx_x.push(x);
            l.tx_y.push(0.0);
            l.rx_x.push(x + 1.0);
            l.rx_y.push(0.0);
            l.power.push(1.0);
            l.distance.push(1.0);
            l.class.push(class);
            l.source.push(0);
        }
        l
    }

    #[test]
    fn marginalized_matches_closed_conditional() {
        // lone interferer at distance 2 from receiver 0 (tx at 3, rx at 1)
        let links = two_links(3.0);
        let torus = Torus::new(100.0);
        let loss = PathLoss::new(4.0);
        let p = 1.0 / (1.0 + 1.0 * (1.0f64 / 2.0).powi(4));
        assert!(marginalized_success(&links, 0, &torus, loss, 1.0, p * 0.999));
        assert!(!marginalized_success(&links, 0, &torus, loss, 1.0, p * 1.001));
        let general = PathLoss::new(4.000_000_1);
        assert!(marginalized_success(&links, 0, &torus, general, 1.0, p * 0.999));
    }

    #[test]
    fn sampled_fading_has_same_law() {
        let links = two_links(3.0);
        let torus = Torus::new(100.0);
        let loss = PathLoss::new(4.0);
        let p = 1.0 / (1.0 + (1.0f64 / 2.0).powi(4));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let hits = (0..n).filter(|_| sampled_success(&links, 0, &torus, loss, 1.0, &mut rng)).count();
        let hat = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hat - p).abs() < 4.0 * se, "{hat} vs {p}");
    }
}
