//! Color assignment by simulated annealing over CIEDE2000 distances.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::model::{bounding_box, CellSet, SetId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// Linear blend towards `other`; `t = 0` keeps `self`.
    pub fn mix(self, other: Rgb, t: f64) -> Rgb {
        let f = |a: u8, b: u8| libm::round(a as f64 + (b as f64 - a as f64) * t) as u8;
        Rgb::new(f(self.r, other.r), f(self.g, other.g), f(self.b, other.b))
    }

    pub fn to_lab(self) -> Lab {
        srgb_to_lab(self)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a #rrggbb color")]
pub struct BadColor(pub String);

impl FromStr for Rgb {
    type Err = BadColor;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadColor(s.into());
        let hex = s.trim().strip_prefix('#').ok_or_else(bad)?;
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        Ok(Rgb::new(byte(0)?, byte(2)?, byte(4)?))
    }
}

/// The Tableau 20 palette: ten hues, each as a dark and a light tone.
pub const TABLEAU20: [Rgb; 20] = [
    Rgb::new(0x1f, 0x77, 0xb4),
    Rgb::new(0xae, 0xc7, 0xe8),
    Rgb::new(0xff, 0x7f, 0x0e),
    Rgb::new(0xff, 0xbb, 0x78),
    Rgb::new(0x2c, 0xa0, 0x2c),
    Rgb::new(0x98, 0xdf, 0x8a),
    Rgb::new(0xd6, 0x27, 0x28),
    Rgb::new(0xff, 0x98, 0x96),
    Rgb::new(0x94, 0x67, 0xbd),
    Rgb::new(0xc5, 0xb0, 0xd5),
    Rgb::new(0x8c, 0x56, 0x4b),
    Rgb::new(0xc4, 0x9c, 0x94),
    Rgb::new(0xe3, 0x77, 0xc2),
    Rgb::new(0xf7, 0xb6, 0xd2),
    Rgb::new(0x7f, 0x7f, 0x7f),
    Rgb::new(0xc7, 0xc7, 0xc7),
    Rgb::new(0xbc, 0xbd, 0x22),
    Rgb::new(0xdb, 0xdb, 0x8d),
    Rgb::new(0x17, 0xbe, 0xcf),
    Rgb::new(0x9e, 0xda, 0xe5),
];

/// The ten dark tones, legible as text color on white.
pub fn tableau10_dark() -> Vec<Rgb> {
    TABLEAU20.iter().step_by(2).copied().collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

/// sRGB (D65) to CIELAB.
pub fn srgb_to_lab(c: Rgb) -> Lab {
    let lin = |u: u8| {
        let v = u as f64 / 255.0;
        if v <= 0.04045 {
            v / 12.92
        } else {
            libm::pow((v + 0.055) / 1.055, 2.4)
        }
    };
    let (r, g, b) = (lin(c.r), lin(c.g), lin(c.b));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let d = 6.0 / 29.0;
    let f = |t: f64| {
        if t > d * d * d {
            libm::cbrt(t)
        } else {
            t / (3.0 * d * d) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (f(x / 0.95047), f(y), f(z / 1.08883));
    Lab::new(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// CIEDE2000 color difference with unit parametric factors.
pub fn ciede2000(p: Lab, q: Lab) -> f64 {
    use core::f64::consts::PI;
    let rad = |deg: f64| deg * PI / 180.0;
    let deg = |r: f64| r * 180.0 / PI;
    let pow7 = |x: f64| libm::pow(x, 7.0);
    let c25 = pow7(25.0);

    let c1 = libm::hypot(p.a, p.b);
    let c2 = libm::hypot(q.a, q.b);
    let cbar = (c1 + c2) / 2.0;
    let g = 0.5 * (1.0 - libm::sqrt(pow7(cbar) / (pow7(cbar) + c25)));
    let a1 = (1.0 + g) * p.a;
    let a2 = (1.0 + g) * q.a;
    let c1p = libm::hypot(a1, p.b);
    let c2p = libm::hypot(a2, q.b);
    let hue = |b: f64, a: f64| {
        if a == 0.0 && b == 0.0 {
            0.0
        } else {
            let h = deg(libm::atan2(b, a));
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1 = hue(p.b, a1);
    let h2 = hue(q.b, a2);

    let dl = q.l - p.l;
    let dc = c2p - c1p;
    let chroma_zero = c1p * c2p == 0.0;
    let dh = if chroma_zero {
        0.0
    } else {
        let d = h2 - h1;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let d_big_h = 2.0 * libm::sqrt(c1p * c2p) * libm::sin(rad(dh / 2.0));

    let lbar = (p.l + q.l) / 2.0;
    let cbarp = (c1p + c2p) / 2.0;
    let hbar = if chroma_zero {
        h1 + h2
    } else if (h1 - h2).abs() <= 180.0 {
        (h1 + h2) / 2.0
    } else if h1 + h2 < 360.0 {
        (h1 + h2 + 360.0) / 2.0
    } else {
        (h1 + h2 - 360.0) / 2.0
    };
    let t = 1.0 - 0.17 * libm::cos(rad(hbar - 30.0))
        + 0.24 * libm::cos(rad(2.0 * hbar))
        + 0.32 * libm::cos(rad(3.0 * hbar + 6.0))
        - 0.20 * libm::cos(rad(4.0 * hbar - 63.0));
    let dtheta = 30.0 * libm::exp(-libm::pow((hbar - 275.0) / 25.0, 2.0));
    let rc = 2.0 * libm::sqrt(pow7(cbarp) / (pow7(cbarp) + c25));
    let l50 = (lbar - 50.0) * (lbar - 50.0);
    let sl = 1.0 + 0.015 * l50 / libm::sqrt(20.0 + l50);
    let sc = 1.0 + 0.045 * cbarp;
    let sh = 1.0 + 0.015 * cbarp * t;
    let rt = -libm::sin(rad(2.0 * dtheta)) * rc;
    let (x, y, z) = (dl / sl, dc / sc, d_big_h / sh);
    libm::sqrt(x * x + y * y + z * z + rt * y * z)
}

/// Pairwise closeness weights between sets, 0 when absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosenessMatrix {
    weights: BTreeMap<(SetId, SetId), u8>,
}

impl ClosenessMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &SetId, b: &SetId) -> (SetId, SetId) {
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    }

    pub fn set(&mut self, a: &SetId, b: &SetId, w: u8) {
        if a == b {
            return;
        }
        if w == 0 {
            self.weights.remove(&Self::key(a, b));
        } else {
            self.weights.insert(Self::key(a, b), w.min(3));
        }
    }

    pub fn get(&self, a: &SetId, b: &SetId) -> u8 {
        self.weights.get(&Self::key(a, b)).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SetId, &SetId, u8)> {
        self.weights.iter().map(|((a, b), w)| (a, b, *w))
    }
}

/// Closeness from final geometry: 3 for overlapping sets next to each other
/// in the stacking order, 2 for other overlapping sets, 1 for disjoint sets
/// whose bounding boxes are at most two cells apart.
pub fn closeness_from_regions(regions: &BTreeMap<SetId, CellSet>, order: &[SetId]) -> ClosenessMatrix {
    let mut adjacent: BTreeMap<(&SetId, &SetId), ()> = BTreeMap::new();
    for w in order.windows(2) {
        adjacent.insert((&w[0], &w[1]), ());
        adjacent.insert((&w[1], &w[0]), ());
    }
    let boxes: BTreeMap<&SetId, (i32, i32, i32, i32)> = regions
        .iter()
        .filter_map(|(s, r)| Some((s, bounding_box(r)?)))
        .collect();
    let mut m = ClosenessMatrix::new();
    let ids: Vec<&SetId> = regions.keys().collect();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let w = if !regions[*a].is_disjoint(&regions[*b]) {
                if adjacent.contains_key(&(*a, *b)) {
                    3
                } else {
                    2
                }
            } else {
                match (boxes.get(a), boxes.get(b)) {
                    (Some(p), Some(q)) => {
                        let dr = (q.0 - p.1 - 1).max(p.0 - q.1 - 1).max(0);
                        let dc = (q.2 - p.3 - 1).max(p.2 - q.3 - 1).max(0);
                        u8::from(dr.max(dc) <= 2)
                    }
                    _ => 0,
                }
            };
            m.set(a, b, w);
        }
    }
    m
}

/// Color distance below which close sets are penalized.
pub const THRESHOLD: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealingSchedule {
    pub restarts: u32,
    pub proposals: u32,
    pub cooling: f64,
    pub start_temperature: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self {
            restarts: 3,
            proposals: 20_000,
            cooling: 0.995,
            start_temperature: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorAssignment {
    pub palette: Vec<Rgb>,
    pub index: BTreeMap<SetId, usize>,
    pub energy: f64,
}

impl ColorAssignment {
    pub fn color(&self, set: &SetId) -> Option<Rgb> {
        self.index.get(set).map(|&i| self.palette[i])
    }
}

/// Energy of assigning palette entry `colors[i]` to `sets[i]`.
pub struct EnergyModel {
    pairs: Vec<(usize, usize, f64)>,
    distance: Vec<Vec<f64>>,
}

impl EnergyModel {
    pub fn new(closeness: &ClosenessMatrix, sets: &[SetId], palette: &[Rgb]) -> Self {
        let pos: BTreeMap<&SetId, usize> = sets.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let pairs = closeness
            .iter()
            .filter_map(|(a, b, w)| Some((*pos.get(a)?, *pos.get(b)?, w as f64)))
            .collect();
        let labs: Vec<Lab> = palette.iter().map(|c| c.to_lab()).collect();
        let distance = labs
            .iter()
            .map(|p| labs.iter().map(|q| ciede2000(*p, *q)).collect())
            .collect();
        Self { pairs, distance }
    }

    pub fn energy(&self, colors: &[usize]) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, w)| w * (THRESHOLD - self.distance[colors[i]][colors[j]]).max(0.0))
            .sum()
    }
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Anneals a palette assignment for `sets`. Colors stay distinct while the
/// palette has room for every set. The identity assignment is the starting
/// incumbent, so the result is never worse than it.
pub fn assign_colors(
    closeness: &ClosenessMatrix,
    sets: &[SetId],
    palette: &[Rgb],
    seed: u64,
    schedule: &AnnealingSchedule,
) -> ColorAssignment {
    assert!(!palette.is_empty(), "palette must not be empty");
    let k = palette.len();
    let n = sets.len();
    let model = EnergyModel::new(closeness, sets, palette);
    let initial: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut best = initial.clone();
    let mut best_e = model.energy(&best);
    let injective = n <= k;

    for restart in 0..schedule.restarts {
        if n == 0 || best_e == 0.0 {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let mut cur = if restart == 0 {
            initial.clone()
        } else {
            let mut pool: Vec<usize> = (0..k).collect();
            (0..n)
                .map(|i| {
                    if injective {
                        let j = i + below(&mut rng, k - i);
                        pool.swap(i, j);
                        pool[i]
                    } else {
                        below(&mut rng, k)
                    }
                })
                .collect()
        };
        let mut cur_e = model.energy(&cur);
        let mut temp = schedule.start_temperature;
        for _ in 0..schedule.proposals {
            let mut next = cur.clone();
            let i = below(&mut rng, n);
            if injective {
                // recolor with an unused color, or swap with another set
                let c = below(&mut rng, k);
                match next.iter().position(|&x| x == c) {
                    Some(j) => next.swap(i, j),
                    None => next[i] = c,
                }
            } else {
                next[i] = below(&mut rng, k);
            }
            let e = model.energy(&next);
            if e <= cur_e || unit(&mut rng) < libm::exp((cur_e - e) / temp) {
                cur = next;
                cur_e = e;
                if cur_e < best_e {
                    best = cur.clone();
                    best_e = cur_e;
                }
            }
            temp = (temp * schedule.cooling).max(1e-9);
        }
    }
    ColorAssignment {
        palette: palette.to_vec(),
        index: sets.iter().cloned().zip(best).collect(),
        energy: best_e,
    }
}
