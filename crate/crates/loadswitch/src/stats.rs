//! Reduction of raw packets to sufficient statistics.
//!
//! Matched filtering each load segment against its known training symbols
//! compresses a packet of `T` samples into two complex numbers without losing
//! information about `(H, F)`:
//!
//! ```text
//! V1_i = x1^H v1_i / S1 ~ CN(H_i,     sigma_n^2 / S1)
//! V2_i = x2^H v2_i / S2 ~ CN(F * H_i, sigma_n^2 / S2)
//! ```
//!
//! Every estimator in this crate consumes [`SufficientStats`] (the per-packet
//! pairs plus the energies and noise level) or the second-order
//! [`CrossMoments`] derived from them. A small CSV format persists the
//! reduced statistics so estimation can run on stored captures.

use std::io;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{PacketObservation, ReceiverScenario, TrainingSequence};

/// Matched-filter outputs for a block of L packets, with the scales needed to
/// interpret them: segment energies `s1`, `s2` and the per-sample noise
/// variance. Fields are public for direct numeric access; use the validating
/// constructor when assembling values by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// First-segment statistic per packet, `V1_i ~ CN(H_i, noise_var/s1)`.
    pub v1: Vec<Complex64>,
    /// Second-segment statistic per packet, `V2_i ~ CN(F*H_i, noise_var/s2)`.
    pub v2: Vec<Complex64>,
    /// Energy of the first training segment.
    pub s1: f64,
    /// Energy of the second training segment.
    pub s2: f64,
    /// Per-sample complex noise variance of the raw packet.
    pub noise_var: f64,
}

impl SufficientStats {
    pub fn new(
        v1: Vec<Complex64>,
        v2: Vec<Complex64>,
        s1: f64,
        s2: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if v1.is_empty() {
            return Err(Error::EmptyInput {
                what: "sufficient statistics need at least one packet",
            });
        }
        if v1.len() != v2.len() {
            return Err(Error::LengthMismatch {
                what: format!("v1 has {} packets but v2 has {}", v1.len(), v2.len()),
            });
        }
        if !(s1.is_finite() && s2.is_finite() && s1 > 0.0 && s2 > 0.0) {
            return Err(Error::ZeroSegmentEnergy { s1, s2 });
        }
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("noise_var must be finite and >= 0, got {noise_var}"),
            });
        }
        if v1
            .iter()
            .chain(v2.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter {
                what: "statistics must be finite".to_string(),
            });
        }
        Ok(Self {
            v1,
            v2,
            s1,
            s2,
            noise_var,
        })
    }

    /// Number of packets L.
    pub fn len(&self) -> usize {
        self.v1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty()
    }

    /// Segment energy ratio `alpha = s2/s1`.
    pub fn alpha(&self) -> f64 {
        self.s2 / self.s1
    }
}

/// Second-order statistics of the reduced packet pairs, averaged over packets
/// with the conjugate on the first index:
///
/// ```text
/// p_ab = (1/L) sum_i conj(Va_i) * Vb_i
/// ```
///
/// so `p12` is `F * p11` plus noise terms in expectation. `p21 = conj(p12)`
/// by construction and `|p12|^2 <= p11 * p22` by Cauchy-Schwarz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMoments {
    pub p11: f64,
    pub p22: f64,
    pub p12: Complex64,
    pub p21: Complex64,
}

/// Reduces one packet to its matched-filter pair `(V1, V2)`.
pub fn reduce_packet(
    obs: &PacketObservation,
    training: &TrainingSequence,
) -> Result<(Complex64, Complex64)> {
    if obs.len() != training.len() {
        return Err(Error::LengthMismatch {
            what: format!(
                "packet has {} samples but training has {}",
                obs.len(),
                training.len()
            ),
        });
    }
    let k = training.k();
    let dot = |xs: &[Complex64], vs: &[Complex64]| -> Complex64 {
        xs.iter().zip(vs).map(|(x, v)| x.conj() * v).sum()
    };
    let v1 = dot(training.x1(), &obs.samples[..k]) / training.s1();
    let v2 = dot(training.x2(), &obs.samples[k..]) / training.s2();
    Ok((v1, v2))
}

/// Reduces a block of packets against the scenario's training, carrying the
/// scenario's energies and noise level into the result.
pub fn reduce_all(
    packets: &[PacketObservation],
    scenario: &ReceiverScenario,
) -> Result<SufficientStats> {
    if packets.is_empty() {
        return Err(Error::EmptyInput {
            what: "no packets to reduce",
        });
    }
    let mut v1 = Vec::with_capacity(packets.len());
    let mut v2 = Vec::with_capacity(packets.len());
    for obs in packets {
        let (a, b) = reduce_packet(obs, scenario.training())?;
        v1.push(a);
        v2.push(b);
    }
    SufficientStats::new(v1, v2, scenario.s1(), scenario.s2(), scenario.noise_var())
}

/// Packet-averaged second-order moments of the reduced statistics.
pub fn cross_moments(stats: &SufficientStats) -> CrossMoments {
    let l = stats.len() as f64;
    let mut p11 = 0.0;
    let mut p22 = 0.0;
    let mut p12 = Complex64::new(0.0, 0.0);
    for (a, b) in stats.v1.iter().zip(stats.v2.iter()) {
        p11 += a.norm_sqr();
        p22 += b.norm_sqr();
        p12 += a.conj() * b;
    }
    p11 /= l;
    p22 /= l;
    p12 /= l;
    CrossMoments {
        p11,
        p22,
        p12,
        p21: p12.conj(),
    }
}

const STATS_MAGIC: &str = "# loadswitch-stats-v1";
const STATS_HEADER: &str = "packet_index,V1_re,V1_im,V2_re,V2_im";

/// Writes the statistics in the `loadswitch-stats-v1` CSV layout: a comment
/// line carrying the scales, a column header, then one row per packet.
/// Floats are printed with the shortest representation that parses back to
/// the identical bits, so a write/read round trip is exact.
pub fn write_stats_csv<W: io::Write>(stats: &SufficientStats, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "{STATS_MAGIC} S1={} S2={} noise_var={}",
        stats.s1, stats.s2, stats.noise_var
    )?;
    writeln!(w, "{STATS_HEADER}")?;
    for (i, (a, b)) in stats.v1.iter().zip(stats.v2.iter()).enumerate() {
        writeln!(w, "{i},{},{},{},{}", a.re, a.im, b.re, b.im)?;
    }
    Ok(())
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        what: format!("{what}: expected a float, got {tok:?}"),
    })
}

/// Reads the `loadswitch-stats-v1` CSV layout produced by [`write_stats_csv`].
/// The parser is strict: the magic line, the header, contiguous packet
/// indices from 0 and exactly five fields per row are all required.
pub fn read_stats_csv<R: io::BufRead>(r: R) -> Result<SufficientStats> {
    let mut lines = r.lines().enumerate();

    let (n0, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        what: "empty file".to_string(),
    })?;
    let first = first?;
    let first = first.trim_end();
    let rest = first
        .strip_prefix(STATS_MAGIC)
        .ok_or_else(|| Error::Parse {
            line: n0 + 1,
            what: format!("expected magic {STATS_MAGIC:?}"),
        })?;
    let mut s1 = None;
    let mut s2 = None;
    let mut noise_var = None;
    for tok in rest.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| Error::Parse {
            line: n0 + 1,
            what: format!("expected key=value, got {tok:?}"),
        })?;
        let slot = match key {
            "S1" => &mut s1,
            "S2" => &mut s2,
            "noise_var" => &mut noise_var,
            _ => {
                return Err(Error::Parse {
                    line: n0 + 1,
                    what: format!("unknown header key {key:?}"),
                })
            }
        };
        *slot = Some(parse_f64(val, n0 + 1, key)?);
    }
    let missing = |k: &str| Error::Parse {
        line: n0 + 1,
        what: format!("missing header key {k:?}"),
    };
    let s1 = s1.ok_or_else(|| missing("S1"))?;
    let s2 = s2.ok_or_else(|| missing("S2"))?;
    let noise_var = noise_var.ok_or_else(|| missing("noise_var"))?;

    let (n1, header) = lines.next().ok_or(Error::Parse {
        line: n0 + 2,
        what: "missing column header".to_string(),
    })?;
    let header = header?;
    if header.trim_end() != STATS_HEADER {
        return Err(Error::Parse {
            line: n1 + 1,
            what: format!("expected header {STATS_HEADER:?}"),
        });
    }

    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    for (n, row) in lines {
        let row = row?;
        let row = row.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: n + 1,
                what: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let idx: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: n + 1,
            what: format!("bad packet_index {:?}", fields[0]),
        })?;
        if idx != v1.len() {
            return Err(Error::Parse {
                line: n + 1,
                what: format!("packet_index {idx} out of order, expected {}", v1.len()),
            });
        }
        let a_re = parse_f64(fields[1], n + 1, "V1_re")?;
        let a_im = parse_f64(fields[2], n + 1, "V1_im")?;
        let b_re = parse_f64(fields[3], n + 1, "V2_re")?;
        let b_im = parse_f64(fields[4], n + 1, "V2_im")?;
        v1.push(Complex64::new(a_re, a_im));
        v2.push(Complex64::new(b_re, b_im));
    }
    SufficientStats::new(v1, v2, s1, s2, noise_var)
}
