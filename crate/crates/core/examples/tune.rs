// Scratch tuning harness: evaluates default-candidate variation configs with
// an exact expected-count model instead of realized scans, bisects the two
// environment coefficients against the calibration targets, and reports the
// health metrics every acceptance criterion leans on. Delete before release.

use divasim_core::variation::TimingParams;

const SIGMA_BOUND: f64 = 8.58;
const OPERATING_TRP: f64 = 7.5;
const MATS: usize = 8;
const WINDOWS: f64 = 64.0;
const PATTERNS: f64 = 1.0;

/// Abramowitz-Stegun 26.2.17 normal CDF, absolute error < 7.5e-8.
fn phi(x: f64) -> f64 {
    if x < -40.0 {
        return 0.0;
    }
    if x > 40.0 {
        return 1.0;
    }
    let neg = x < 0.0;
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.2316419 * x);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = pdf * poly;
    if neg {
        upper
    } else {
        1.0 - upper
    }
}

#[derive(Clone, Copy)]
struct Cand {
    label: &'static str,
    sigma: f64,
    base_trp: f64,
    bl: f64,
    wl: f64,
    alpha: f64,
    beta: f64,
    ext_cols: usize,
}

/// Local-column cluster starts per mat for `n` evenly spaced external
/// columns under the beat-major layout.
fn clusters(n: usize) -> Vec<u32> {
    let stride = 512 / n;
    (0..n)
        .map(|i| ((i * stride * 8) % 512) as u32)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

// ext_cols = 512 means every external column: 64 clusters per mat.


#[derive(Clone, Copy)]
struct Env {
    temp: f64,
    refresh: f64,
}

fn offset(c: &Cand, tc: f64, rc: f64, env: Env) -> f64 {
    let _ = c;
    tc * (env.temp - 45.0) + rc * (env.refresh / 64.0).log2()
}

/// Expected erroneous-request count and per-residue profile for the
/// 16-column full-row sweep at the operating tRP, for one env offset.
/// Requests group 8 beats in one mat with all 8 chips at equal margins, so
/// the per-request failure probability is one minus the survival of 64
/// equal-margin bits per (mat, column-cluster) pair.
fn expected_profile(c: &Cand, off: f64, applied: f64) -> (f64, Vec<f64>) {
    let cl = clusters(c.ext_cols);
    let mut profile = vec![0.0f64; 512];
    for res in 0..512usize {
        let u = (res.max(511 - res)) as f64 / 511.0;
        let mut per_row = 0.0;
        for mat in 0..MATS {
            let pre = (c.alpha * mat as f64).min(c.beta + c.alpha * (MATS - 1 - mat) as f64);
            for &cluster in &cl {
                // Survival over the request's 8 beats x 8 chips.
                let mut survive = 1.0f64;
                for b in 0..8u32 {
                    let v = (cluster + b) as f64 / 511.0;
                    let det = c.base_trp + c.bl * u + c.wl * v + pre;
                    let p_bit = phi((det + off - applied) / c.sigma);
                    survive *= (1.0 - p_bit).powi(8);
                }
                per_row += 1.0 - survive;
            }
        }
        profile[res] = per_row * WINDOWS * PATTERNS;
    }
    (profile.iter().sum(), profile)
}

fn expected_total(c: &Cand, off: f64, applied: f64) -> f64 {
    expected_profile(c, off, applied).0
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Predicted cosine of one realized draw: hot bins Poisson(H), cold bins a
/// nested thinning with per-bin keep rate C/H.
fn realized_cosine(h: &[f64], c: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut dh = 0.0;
    let mut dc = 0.0;
    for (&hi, &ci) in h.iter().zip(c) {
        let p = if hi > 0.0 { ci / hi } else { 0.0 };
        num += p * (hi * hi + hi);
        dh += hi * hi + hi;
        dc += p * p * hi * hi + p * hi;
    }
    if dh == 0.0 || dc == 0.0 {
        0.0
    } else {
        num / (dh.sqrt() * dc.sqrt())
    }
}

fn bisect(mut lo: f64, mut hi: f64, iters: usize, mut ratio_minus_target: impl FnMut(f64) -> f64) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if ratio_minus_target(mid) > 0.0 {
            // Ratio still above target: need a stronger coefficient.
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    let cands = [
        Cand { label: "512c s0.20 b0.60", sigma: 0.20, base_trp: 0.60, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.20 b0.50", sigma: 0.20, base_trp: 0.50, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.20 b0.40", sigma: 0.20, base_trp: 0.40, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.25 b0.50", sigma: 0.25, base_trp: 0.50, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.25 b0.40", sigma: 0.25, base_trp: 0.40, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.25 b0.30", sigma: 0.25, base_trp: 0.30, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.30 b0.30", sigma: 0.30, base_trp: 0.30, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
        Cand { label: "512c s0.15 b0.70", sigma: 0.15, base_trp: 0.70, bl: 4.0, wl: 0.8, alpha: 0.4, beta: 0.3, ext_cols: 512 },
    ];
    let cold = Env { temp: 45.0, refresh: 256.0 };
    let hot = Env { temp: 85.0, refresh: 256.0 };
    let hot_fast = Env { temp: 85.0, refresh: 64.0 };

    for cand in &cands {
        let c = cand;
        let mut tc = 0.0f64;
        let mut rc = 0.0f64;
        for _round in 0..2 {
            tc = bisect(0.0, 0.05, 40, |t| {
                let ch = expected_total(c, offset(c, t, rc, hot), OPERATING_TRP);
                let cc = expected_total(c, offset(c, t, rc, cold), OPERATING_TRP);
                if ch <= 0.0 {
                    return -1.0;
                }
                cc / ch - 0.10
            });
            rc = bisect(0.0, 0.08, 40, |r| {
                let c256 = expected_total(c, offset(c, tc, r, hot), OPERATING_TRP);
                let c64 = expected_total(c, offset(c, tc, r, hot_fast), OPERATING_TRP);
                if c256 <= 0.0 {
                    return -1.0;
                }
                c64 / c256 - 0.85
            });
        }

        let off_h = offset(c, tc, rc, hot);
        let off_c = offset(c, tc, rc, cold);
        let off_f = offset(c, tc, rc, hot_fast);
        let (th, ph) = expected_profile(c, off_h, OPERATING_TRP);
        let (tcld, pc) = expected_profile(c, off_c, OPERATING_TRP);
        let (tf, _) = expected_profile(c, off_f, OPERATING_TRP);
        let cos_exp = cosine(&ph, &pc);
        let cos_real = realized_cosine(&ph, &pc);

        // Weighted mean bin height drives realized-cosine stability.
        let hw = ph.iter().map(|x| x * x).sum::<f64>() / th.max(1e-12);
        let nz_cold = pc.iter().filter(|&&x| x >= 0.5).count();
        let top_cold = pc.iter().cloned().fold(0.0f64, f64::max);

        // Certain-zero margins at the two upper sweep points.
        let vmax = (*clusters(c.ext_cols).last().unwrap() as f64 + 7.0) / 511.0;
        let det_max = c.base_trp
            + c.bl
            + c.wl * vmax
            + (0..MATS)
                .map(|m| (c.alpha * m as f64).min(c.beta + c.alpha * (MATS - 1 - m) as f64))
                .fold(0.0f64, f64::max);
        let z125 = (12.5 - det_max - off_h) / c.sigma;
        let z100 = (10.0 - det_max - off_h) / c.sigma;

        let sweep: Vec<f64> = [12.5, 10.0, 7.5, 5.0]
            .iter()
            .map(|&v| expected_total(c, off_h, v))
            .collect();

        // Edge and middle internal-row request means at the operating point.
        let edge_mean = (0..16)
            .chain(496..512)
            .map(|r| ph[r])
            .sum::<f64>()
            / 32.0;
        let mid_mean = (248..264).map(|r| ph[r]).sum::<f64>() / 16.0;

        // Hottest bit-level z under the hot env; request saturation onset.
        let z_hot_min = (OPERATING_TRP - det_max - off_h) / c.sigma;

        // Negative-control slack: fraction of residues whose bitline gap
        // alone exceeds one grid step, driving the profiling control check.
        let gap_frac = (0..512)
            .filter(|&r: &usize| {
                let u = (r.max(511 - r)) as f64 / 511.0;
                c.bl * (1.0 - u) > 1.25 + 0.2
            })
            .count() as f64
            / 512.0;

        let std = TimingParams::standard();
        let margin_trcd = (std.trcd_ns - (2.0 + c.bl + c.wl + 1.5 + off_h)) / c.sigma;

        println!("== {} ==", c.label);
        println!("  tc {:.6}  rc {:.6}", tc, rc);
        println!(
            "  totals cold {:.1} hot {:.1} fast {:.1}  ratios t {:.4} r {:.4}",
            tcld,
            th,
            tf,
            tcld / th,
            tf / th
        );
        println!(
            "  cos exp {:.4}  cos realized-pred {:.4}  Hw {:.1}  nz_cold {}  top_cold {:.1}",
            cos_exp, cos_real, hw, nz_cold, top_cold
        );
        println!(
            "  z_hot_min {:.2}  z(10.0) {:.2} ({})  z(12.5) {:.2} ({})",
            z_hot_min,
            z100,
            if z100 >= SIGMA_BOUND { "certain-zero" } else { "NOISY" },
            z125,
            if z125 >= SIGMA_BOUND { "certain-zero" } else { "NOISY" }
        );
        println!(
            "  sweep E[1.25 grid] 12.5:{:.1} 10:{:.1} 7.5:{:.1} 5:{:.1}",
            sweep[0], sweep[1], sweep[2], sweep[3]
        );
        println!(
            "  edge_mean {:.2}  mid_mean {:.4}  gap_frac {:.3}  trcd_margin {:.1}sigma",
            edge_mean, mid_mean, gap_frac, margin_trcd
        );
        println!();
    }
}
