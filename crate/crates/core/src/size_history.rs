//! Piecewise constant/exponential coalescence-rate histories.
//!
//! A history describes the inverse population size `α(t)` of one population
//! over its lifetime `[0, τ)`, where `t` runs backwards from the recent end of
//! the population. Segment 0 is the most recent. Within an exponential segment
//! the rate is `α(u) = α₀ · e^{β u}` in segment-local time `u`, where `α₀` is
//! the rate at the recent end of the segment; `β > 0` means the population
//! grew forward in time.

use alloc::vec::Vec;

use crate::math::{self, exp, expm1, ln_1p};
use crate::{Error, Result};

/// Integrand values below `e^{-LOG_UNDERFLOW}` are indistinguishable from 0.
const LOG_UNDERFLOW: f64 = 745.0;
const QUADRATURE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Constant,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    kind: SegmentKind,
    duration: f64,
    size: f64,
    rate: f64,
    growth_rate: f64,
}

impl Segment {
    /// Constant segment with coalescence rate `rate` (= 1 / size).
    pub fn constant(duration: f64, rate: f64) -> Result<Self> {
        Self::build(SegmentKind::Constant, duration, 1.0 / rate, rate, 0.0)
    }

    /// Exponential segment with rate `rate` at its recent end and growth rate
    /// `growth` (per unit time, going back in time the rate is multiplied by
    /// `e^{growth·u}`).
    pub fn exponential(duration: f64, rate: f64, growth: f64) -> Result<Self> {
        Self::build(SegmentKind::Exponential, duration, 1.0 / rate, rate, growth)
    }

    /// Constant segment given by its population size.
    pub fn constant_size(duration: f64, size: f64) -> Result<Self> {
        Self::build(SegmentKind::Constant, duration, size, 1.0 / size, 0.0)
    }

    /// Exponential segment given by its population size at the recent end;
    /// the size going back in time is `size · e^{-growth·u}`.
    pub fn exponential_size(duration: f64, size: f64, growth: f64) -> Result<Self> {
        Self::build(SegmentKind::Exponential, duration, size, 1.0 / size, growth)
    }

    fn build(kind: SegmentKind, duration: f64, size: f64, rate: f64, growth: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::domain("segment duration must be positive"));
        }
        if !(size > 0.0 && size.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain("population size must be positive and finite"));
        }
        if !growth.is_finite() {
            return Err(Error::domain("growth rate must be finite"));
        }
        Ok(Segment {
            kind,
            duration,
            size,
            rate,
            growth_rate: growth,
        })
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Population size at the recent end of the segment.
    pub fn size(&self) -> f64 {
        self.size
    }

    /// Coalescence rate at the recent end of the segment.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn growth_rate(&self) -> f64 {
        self.growth_rate
    }

    fn is_flat(&self) -> bool {
        self.kind == SegmentKind::Constant || self.growth_rate == 0.0
    }

    fn rate_at(&self, u: f64) -> f64 {
        if self.is_flat() {
            self.rate
        } else {
            self.rate * exp(self.growth_rate * u)
        }
    }

    /// `∫₀ᵘ α`, in segment-local time.
    fn integrated_rate(&self, u: f64) -> f64 {
        if self.is_flat() {
            self.rate * u
        } else {
            self.rate * expm1(self.growth_rate * u) / self.growth_rate
        }
    }

    /// Local time `u` at which `∫₀ᵘ α = r`, if it is reached.
    fn inverse_integrated_rate(&self, r: f64) -> Option<f64> {
        if self.is_flat() {
            return Some(r / self.rate);
        }
        let g = self.growth_rate;
        let y = g * r / self.rate;
        (y > -1.0).then(|| ln_1p(y) / g)
    }

    /// `∫₀^len exp(-c ∫₀ᵘ α) du`.
    fn waiting_integral(&self, c: f64, len: f64) -> f64 {
        if self.is_flat() {
            let a = c * self.rate;
            return if len.is_infinite() {
                1.0 / a
            } else {
                -expm1(-a * len) / a
            };
        }
        let g = self.growth_rate;
        // beyond `cut` the integrand underflows
        let y = LOG_UNDERFLOW * g / (c * self.rate);
        let upper = if y > -1.0 { len.min(ln_1p(y) / g) } else { len };
        math::integrate(
            |u| exp(-c * self.integrated_rate(u)),
            0.0,
            upper,
            QUADRATURE_TOL,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeHistory {
    segments: Vec<Segment>,
    starts: Vec<f64>,
    cum_rate: Vec<f64>,
    total: f64,
}

impl SizeHistory {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut starts = Vec::with_capacity(segments.len());
        let mut cum_rate = Vec::with_capacity(segments.len());
        let (mut t, mut r) = (0.0, 0.0);
        for (i, seg) in segments.iter().enumerate() {
            if seg.duration.is_infinite() {
                if i + 1 != segments.len() {
                    return Err(Error::domain("only the last segment may be infinite"));
                }
                if seg.kind == SegmentKind::Exponential && seg.growth_rate < 0.0 {
                    return Err(Error::domain(
                        "an infinite exponential segment needs a nonnegative growth rate",
                    ));
                }
            }
            starts.push(t);
            cum_rate.push(r);
            t += seg.duration;
            r += seg.integrated_rate(seg.duration);
        }
        Ok(SizeHistory {
            segments,
            starts,
            cum_rate,
            total: t,
        })
    }

    /// History of a zero-duration population.
    pub fn empty() -> Self {
        SizeHistory {
            segments: Vec::new(),
            starts: Vec::new(),
            cum_rate: Vec::new(),
            total: 0.0,
        }
    }

    pub fn constant(duration: f64, rate: f64) -> Result<Self> {
        Self::new(alloc::vec![Segment::constant(duration, rate)?])
    }

    pub fn exponential(duration: f64, rate: f64, growth: f64) -> Result<Self> {
        Self::new(alloc::vec![Segment::exponential(duration, rate, growth)?])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.total
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.total {
            Ok(())
        } else {
            Err(Error::domain("time outside the history's span"))
        }
    }

    /// Segment containing local time `t`, clamped to the last segment.
    fn locate(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// `α(t)`.
    pub fn rate_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let i = self.locate(t);
        match self.segments.get(i) {
            Some(seg) => Ok(seg.rate_at(t - self.starts[i])),
            None => Err(Error::domain("empty history has no rate")),
        }
    }

    /// `R(t) = ∫₀ᵗ α(x) dx`.
    pub fn integrated_rate(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if self.segments.is_empty() || t == 0.0 {
            return Ok(0.0);
        }
        if t == self.total {
            let last = self.segments.len() - 1;
            let seg = &self.segments[last];
            return Ok(self.cum_rate[last] + seg.integrated_rate(seg.duration));
        }
        let i = self.locate(t);
        Ok(self.cum_rate[i] + self.segments[i].integrated_rate(t - self.starts[i]))
    }

    /// The time `t` with `R(t) = r`, or `None` when `r ≥ R(total_duration)`.
    pub fn inverse_integrated_rate(&self, r: f64) -> Option<f64> {
        if !(r >= 0.0) {
            return None;
        }
        let i = self.cum_rate.partition_point(|&c| c <= r).checked_sub(1)?;
        let seg = &self.segments[i];
        let u = seg.inverse_integrated_rate(r - self.cum_rate[i])?;
        (u < seg.duration).then(|| self.starts[i] + u)
    }

    /// Expected waiting time to the first coalescence among `m` lineages,
    /// truncated at `tau`: `c_m^τ = ∫₀^τ exp(-C(m,2) R(t)) dt`.
    ///
    /// `tau = ∞` gives the untruncated expectation and requires `R` to
    /// diverge.
    pub fn first_coalescence_time(&self, m: usize, tau: f64) -> Result<f64> {
        if m < 2 {
            return Err(Error::domain("first coalescence needs at least two lineages"));
        }
        self.check_time(tau)?;
        if tau.is_infinite() && self.integrated_rate(tau)?.is_finite() {
            return Err(Error::Divergence(alloc::format!(
                "untruncated waiting time with convergent integrated rate (m = {m})"
            )));
        }
        let c = math::pairs(m);
        let mut acc = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let start = self.starts[i];
            if start >= tau {
                break;
            }
            let survive = exp(-c * self.cum_rate[i]);
            if survive == 0.0 {
                break;
            }
            let len = seg.duration.min(tau - start);
            acc += survive * seg.waiting_integral(c, len);
        }
        Ok(acc)
    }

    /// The restriction of the history to `[0, tau)`.
    pub fn truncate(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::domain("truncation time must be positive"));
        }
        self.check_time(tau)?;
        let mut segments = Vec::new();
        for (seg, &start) in self.segments.iter().zip(&self.starts) {
            if start >= tau {
                break;
            }
            let mut seg = *seg;
            if start + seg.duration > tau {
                seg.duration = tau - start;
            }
            segments.push(seg);
        }
        SizeHistory::new(segments)
    }

    /// The rate if `α` is constant on `[0, tau)`.
    pub fn constant_rate(&self, tau: f64) -> Option<f64> {
        let mut rate = None;
        for (seg, &start) in self.segments.iter().zip(&self.starts) {
            if start >= tau {
                break;
            }
            if !seg.is_flat() {
                return None;
            }
            match rate {
                None => rate = Some(seg.rate),
                Some(r) if r == seg.rate => {}
                Some(_) => return None,
            }
        }
        rate
    }
}
