//! Transient simulation of one bitline and its access wordline.
//!
//! The bitline is an RC ladder with one segment per row; the sense
//! amplifier, precharge driver, and the accessed cell hang off it. The cell
//! starts charged to vdd, the bitline at the precharge level, and the run
//! walks three phases: charge sharing after activation, a saturating
//! first-order amplifier pull toward vdd, and the precharge drain back to
//! half vdd. The wordline is not solved as a coupled network; its RC
//! constants delay the access transistor's control edges by one segment
//! delay per column, which is all the column-direction orderings need.
//!
//! The solver exists to justify orderings between near and far cells, not
//! to produce calibrated nanosecond figures. Wire resistances default to
//! deliberately high values so the orderings are visible at 512 segments;
//! they are not taken from any process kit.

use std::io;

use crate::error::ModelError;

/// Electrical and solver parameters for one simulated access.
#[derive(Debug, Clone)]
pub struct CircuitParams {
    pub cell_cap_f: f64,
    /// Whole-line capacitance, split evenly over the segments.
    pub bitline_cap_total_f: f64,
    pub segments: usize,
    pub bitline_res_per_segment_ohm: f64,
    pub wordline_res_per_segment_ohm: f64,
    pub wordline_cap_per_segment_f: f64,
    /// Access transistor on-resistance.
    pub access_res_ohm: f64,
    /// Amplifier drive resistance toward vdd once sensing is enabled.
    pub sense_res_ohm: f64,
    /// Precharge driver resistance toward half vdd.
    pub precharge_res_ohm: f64,
    pub vdd_v: f64,
    /// Boosted wordline level; the solver only checks it clears vdd, the
    /// access transistor is binary on/off.
    pub v_wordline_v: f64,
    pub v_precharge_v: f64,
    pub v_ready_v: f64,
    /// Amplifier enable lag after activation, covering charge sharing.
    pub sense_enable_delay_s: f64,
    pub timestep_s: f64,
    /// Spacing of recorded waveform samples.
    pub sample_interval_s: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        CircuitParams {
            cell_cap_f: 24e-15,
            bitline_cap_total_f: 144e-15,
            segments: 512,
            bitline_res_per_segment_ohm: 350.0,
            wordline_res_per_segment_ohm: 400.0,
            wordline_cap_per_segment_f: 12e-15,
            access_res_ohm: 20e3,
            sense_res_ohm: 50e3,
            precharge_res_ohm: 2e3,
            vdd_v: 1.2,
            v_wordline_v: 3.0,
            v_precharge_v: 0.6,
            v_ready_v: 0.9,
            sense_enable_delay_s: 5e-9,
            timestep_s: 20e-15,
            sample_interval_s: 1e-12,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("cell capacitance", self.cell_cap_f),
            ("bitline capacitance", self.bitline_cap_total_f),
            ("wordline segment capacitance", self.wordline_cap_per_segment_f),
            ("access resistance", self.access_res_ohm),
            ("sense resistance", self.sense_res_ohm),
            ("precharge resistance", self.precharge_res_ohm),
            ("timestep", self.timestep_s),
            ("sample interval", self.sample_interval_s),
        ];
        for (what, v) in positive {
            if !(v > 0.0) {
                return Err(ModelError::invalid("circuit", format!("{what} must be positive")));
            }
        }
        // Wire resistances may be exactly zero, which collapses the line
        // into one equipotential node.
        for (what, v) in [
            ("bitline segment resistance", self.bitline_res_per_segment_ohm),
            ("wordline segment resistance", self.wordline_res_per_segment_ohm),
        ] {
            if !(v >= 0.0) {
                return Err(ModelError::invalid("circuit", format!("{what} cannot be negative")));
            }
        }
        if self.segments == 0 {
            return Err(ModelError::invalid("circuit", "segment count must be positive"));
        }
        if (self.v_precharge_v - self.vdd_v / 2.0).abs() > 1e-12 {
            return Err(ModelError::invalid("circuit", "precharge level must be half vdd"));
        }
        if !(self.v_ready_v > self.v_precharge_v && self.v_ready_v < self.vdd_v) {
            return Err(ModelError::invalid(
                "circuit",
                "ready threshold must sit between the precharge level and vdd",
            ));
        }
        if self.v_wordline_v <= self.vdd_v {
            return Err(ModelError::invalid("circuit", "wordline level must exceed vdd"));
        }
        Ok(())
    }

    fn segment_cap(&self) -> f64 {
        self.bitline_cap_total_f / self.segments as f64
    }

    /// Largest explicit-Euler step that keeps every node update monotone:
    /// the node capacitance over its total attached conductance.
    pub fn stability_bound_s(&self) -> f64 {
        let g_access = 1.0 / self.access_res_ohm;
        let g_sense = 1.0 / self.sense_res_ohm;
        let g_pre = 1.0 / self.precharge_res_ohm;
        let cell = self.cell_cap_f / g_access;
        if self.bitline_res_per_segment_ohm == 0.0 {
            let lumped = self.bitline_cap_total_f / (g_sense + g_pre + g_access);
            return lumped.min(cell);
        }
        let g_seg = 1.0 / self.bitline_res_per_segment_ohm;
        // Interior node: two ladder neighbors plus, at worst, the cell.
        let interior = self.segment_cap() / (2.0 * g_seg + g_access);
        // End node: one neighbor plus both drivers and possibly the cell.
        let end = self.segment_cap() / (g_seg + g_sense + g_pre + g_access);
        interior.min(end).min(cell)
    }

    /// Delay of the wordline control edge reaching `col`.
    fn wordline_delay_s(&self, col: usize) -> f64 {
        self.wordline_res_per_segment_ohm * self.wordline_cap_per_segment_f * col as f64
    }
}

/// Phase boundaries of one access, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMarkers {
    pub activation_ns: f64,
    pub sensing_ns: f64,
    pub precharge_ns: f64,
}

/// Bitline voltage at the accessed cell's position over time.
#[derive(Debug, Clone)]
pub struct Waveform {
    /// (time_ns, volts), strictly increasing in time.
    pub samples: Vec<(f64, f64)>,
    pub phases: PhaseMarkers,
    pub v_precharge_v: f64,
    /// Cell capacitor voltage when the run ended.
    pub final_cell_v: f64,
}

impl Waveform {
    /// Linear interpolation between samples; errors outside the window.
    pub fn voltage_at(&self, t_ns: f64) -> Result<f64, ModelError> {
        let (first, last) = match (self.samples.first(), self.samples.last()) {
            (Some(f), Some(l)) => (f.0, l.0),
            _ => return Err(ModelError::invalid("waveform", "no samples")),
        };
        if t_ns < first || t_ns > last {
            return Err(ModelError::invalid(
                "waveform",
                format!("time {t_ns} ns outside the simulated window [{first}, {last}]"),
            ));
        }
        let idx = self.samples.partition_point(|(t, _)| *t < t_ns);
        if idx == 0 {
            return Ok(self.samples[0].1);
        }
        let (t0, v0) = self.samples[idx - 1];
        let (t1, v1) = self.samples[idx];
        if t1 == t0 {
            return Ok(v1);
        }
        Ok(v0 + (v1 - v0) * (t_ns - t0) / (t1 - t0))
    }

    /// Phase label for a sample time.
    pub fn phase_at(&self, t_ns: f64) -> &'static str {
        if t_ns < self.phases.sensing_ns {
            "charge_sharing"
        } else if t_ns < self.phases.precharge_ns {
            "sensing"
        } else {
            "precharge"
        }
    }

    /// Write the samples as `time_ns,voltage_v,phase` rows.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "time_ns,voltage_v,phase")?;
        for &(t, v) in &self.samples {
            writeln!(w, "{t},{v},{}", self.phase_at(t))?;
        }
        Ok(())
    }

    /// First crossing of `threshold` going up, by linear interpolation;
    /// `None` when the waveform never gets there.
    pub fn first_crossing_ns(&self, threshold: f64) -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for &(t, v) in &self.samples {
            if v >= threshold {
                return match prev {
                    Some((t0, v0)) if v > v0 => Some(t0 + (t - t0) * (threshold - v0) / (v - v0)),
                    _ => Some(t),
                };
            }
            prev = Some((t, v));
        }
        None
    }
}

/// Time until the bitline at the cell reaches the ready level, or `None`
/// when sensing never completes within the window.
pub fn time_to_ready(waveform: &Waveform, params: &CircuitParams) -> Option<f64> {
    waveform.first_crossing_ns(params.v_ready_v)
}

/// Bitline voltage at the cell at `t_ns`.
pub fn restored_voltage(waveform: &Waveform, t_ns: f64) -> Result<f64, ModelError> {
    waveform.voltage_at(t_ns)
}

/// Distance from the precharge level at `t_ns`; zero means fully
/// precharged.
pub fn precharge_residual(waveform: &Waveform, t_ns: f64) -> Result<f64, ModelError> {
    Ok((waveform.voltage_at(t_ns)? - waveform.v_precharge_v).abs())
}

/// Simulate one access to the cell at `(cell_row, cell_col)`: activation at
/// `act_time_ns`, precharge at `pre_time_ns`, running 15 ns past the
/// precharge edge.
pub fn simulate_access(
    cell_row: usize,
    cell_col: usize,
    act_time_ns: f64,
    pre_time_ns: f64,
    params: &CircuitParams,
) -> Result<Waveform, ModelError> {
    params.validate()?;
    if cell_row >= params.segments || cell_col >= params.segments {
        return Err(ModelError::invalid(
            "circuit",
            format!(
                "cell ({cell_row}, {cell_col}) outside the {0}x{0} mat",
                params.segments
            ),
        ));
    }
    if !(pre_time_ns > act_time_ns && act_time_ns >= 0.0) {
        return Err(ModelError::invalid(
            "circuit",
            "precharge must follow activation and activation cannot be negative",
        ));
    }
    let dt = params.timestep_s;
    let bound = params.stability_bound_s();
    if dt > bound {
        return Err(ModelError::invalid(
            "circuit",
            format!("timestep {dt:.3e} s is unstable, the bound for these parameters is {bound:.3e} s"),
        ));
    }

    // A zero-resistance bitline is one equipotential node holding the whole
    // line capacitance, which is the exact limit of the ladder.
    let lumped = params.bitline_res_per_segment_ohm == 0.0;
    let (n, c_node, cell_node) = if lumped {
        (1, params.bitline_cap_total_f, 0)
    } else {
        (params.segments, params.segment_cap(), cell_row)
    };
    let g_seg = if lumped { 0.0 } else { 1.0 / params.bitline_res_per_segment_ohm };
    let g_access = 1.0 / params.access_res_ohm;
    let g_sense = 1.0 / params.sense_res_ohm;
    let g_pre = 1.0 / params.precharge_res_ohm;

    let act_s = act_time_ns * 1e-9;
    let pre_s = pre_time_ns * 1e-9;
    let end_s = pre_s + 15e-9;
    let wl_delay = params.wordline_delay_s(cell_col);
    let wl_on_s = act_s + wl_delay;
    let wl_off_s = pre_s + wl_delay;
    let sense_on_s = act_s + params.sense_enable_delay_s;

    let mut v = vec![params.v_precharge_v; n];
    let mut v_cell = params.vdd_v;
    let mut next = v.clone();

    let steps = (end_s / dt).ceil() as u64;
    let sample_every = (params.sample_interval_s / dt).round().max(1.0) as u64;
    let mut samples = Vec::with_capacity((steps / sample_every + 2) as usize);
    samples.push((0.0, v[cell_node]));

    let dt_over_cnode = dt / c_node;
    for step in 0..steps {
        let t = step as f64 * dt;
        let wordline_on = t >= wl_on_s && t < wl_off_s;
        let sensing = t >= sense_on_s && t < pre_s;
        let precharging = t >= pre_s;

        // Ladder diffusion.
        for i in 0..n {
            let mut current = 0.0;
            if i > 0 {
                current += (v[i - 1] - v[i]) * g_seg;
            }
            if i + 1 < n {
                current += (v[i + 1] - v[i]) * g_seg;
            }
            next[i] = v[i] + current * dt_over_cnode;
        }
        // Drivers at the amplifier end.
        if sensing {
            next[0] += (params.vdd_v - v[0]) * g_sense * dt_over_cnode;
        }
        if precharging {
            next[0] += (params.v_precharge_v - v[0]) * g_pre * dt_over_cnode;
        }
        // Cell through the access transistor.
        if wordline_on {
            let i_cell = (v_cell - v[cell_node]) * g_access;
            next[cell_node] += i_cell * dt_over_cnode;
            v_cell -= i_cell * dt / params.cell_cap_f;
        }
        std::mem::swap(&mut v, &mut next);

        let low = -1e-9;
        let high = params.vdd_v + 1e-9;
        if !(low..=high).contains(&v[cell_node]) || !(low..=high).contains(&v[0]) {
            return Err(ModelError::invalid(
                "circuit",
                format!(
                    "integration left the physical voltage range at step {step}, timestep {dt:.3e} s"
                ),
            ));
        }

        if (step + 1) % sample_every == 0 || step + 1 == steps {
            samples.push(((t + dt) * 1e9, v[cell_node]));
        }
    }

    Ok(Waveform {
        samples,
        phases: PhaseMarkers {
            activation_ns: act_time_ns,
            sensing_ns: sense_on_s * 1e9,
            precharge_ns: pre_time_ns,
        },
        v_precharge_v: params.v_precharge_v,
        final_cell_v: v_cell,
    })
}
