//! TOML run configuration and its conversion into library study configs.
//!
//! Complex values accept three spellings: `[re, im]` (canonical, used on
//! output), a bare number, or a string like `"0.986+0.2445j"`. Every unknown
//! key is rejected so typos surface as errors naming the key.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use loadswitch::model::{zadoff_chu, ChannelPrior, Impedance, LoadSwitchPlan, ReceiverScenario};
use loadswitch::montecarlo::{EstimatorKind, PriorSpec, SweepConfig};

/// Complex number with the config-file spellings attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSpec(pub Complex64);

impl Serialize for ComplexSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Pair([f64; 2]),
    Real(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for ComplexSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match ComplexRepr::deserialize(d)? {
            ComplexRepr::Pair([re, im]) => Ok(ComplexSpec(Complex64::new(re, im))),
            ComplexRepr::Real(re) => Ok(ComplexSpec(Complex64::new(re, 0.0))),
            ComplexRepr::Text(s) => parse_complex_text(&s).map(ComplexSpec).ok_or_else(|| {
                D::Error::custom(format!(
                    "cannot parse complex value {s:?}; use [re, im] or \"re+imj\""
                ))
            }),
        }
    }
}

/// Parses `re+imj`, `imj`, or a bare real. Whitespace is ignored; the split
/// sign must not belong to an exponent.
pub fn parse_complex_text(raw: &str) -> Option<Complex64> {
    let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('j') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
            break;
        }
    }
    let imaginary = |t: &str| -> Option<f64> {
        match t {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => t.parse().ok(),
        }
    };
    match split {
        Some(i) => {
            let re: f64 = body[..i].parse().ok()?;
            let im = imaginary(&body[i..])?;
            Some(Complex64::new(re, im))
        }
        None => imaginary(body).map(|im| Complex64::new(0.0, im)),
    }
}

/// Complex flag parser for clap arguments.
pub fn complex_flag(raw: &str) -> Result<Complex64, String> {
    parse_complex_text(raw).ok_or_else(|| format!("cannot parse {raw:?} as re+imj"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sweep,
    Bias,
    Correlation,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// One of `iid`, `slow_fading`, `exponential`.
    pub kind: String,
    #[serde(default = "default_sigma")]
    pub sigma_h2: f64,
    /// Packet-lag correlation for the exponential kind.
    #[serde(default)]
    pub r: Option<f64>,
}

fn default_sigma() -> f64 {
    1.0
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            kind: "iid".to_string(),
            sigma_h2: 1.0,
            r: None,
        }
    }
}

impl PriorConfig {
    pub fn to_spec(&self) -> Result<PriorSpec, String> {
        let sigma_h2 = self.sigma_h2;
        match self.kind.as_str() {
            "iid" => Ok(PriorSpec::Iid { sigma_h2 }),
            "slow_fading" => Ok(PriorSpec::SlowFading { sigma_h2 }),
            "exponential" => {
                let r = self
                    .r
                    .ok_or("prior.kind = \"exponential\" needs prior.r in [0, 1)")?;
                Ok(PriorSpec::Exponential { sigma_h2, r })
            }
            other => Err(format!(
                "unknown prior.kind {other:?}; expected iid, slow_fading, or exponential"
            )),
        }
    }
}

/// Physical setup of a run. Defaults reproduce the reference scenario: a
/// 73 + 42.5j ohm antenna switched between 50 and 50 + 20j ohm loads over a
/// length-64 root-1 constant-magnitude training split at 32.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_antenna")]
    pub antenna: ComplexSpec,
    #[serde(default = "default_load1")]
    pub load1: ComplexSpec,
    #[serde(default = "default_load2")]
    pub load2: ComplexSpec,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_root")]
    pub root: u64,
}

fn default_antenna() -> ComplexSpec {
    ComplexSpec(Complex64::new(73.0, 42.5))
}

fn default_load1() -> ComplexSpec {
    ComplexSpec(Complex64::new(50.0, 0.0))
}

fn default_load2() -> ComplexSpec {
    ComplexSpec(Complex64::new(50.0, 20.0))
}

fn default_t() -> usize {
    64
}

fn default_k() -> usize {
    32
}

fn default_root() -> u64 {
    1
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antenna: default_antenna(),
            load1: default_load1(),
            load2: default_load2(),
            t: default_t(),
            k: default_k(),
            root: default_root(),
        }
    }
}

impl ScenarioConfig {
    pub fn build(&self, noise_var: f64) -> loadswitch::Result<ReceiverScenario> {
        let antenna = Impedance::new(self.antenna.0.re, self.antenna.0.im)?;
        let z1 = Impedance::new(self.load1.0.re, self.load1.0.im)?;
        let z2 = Impedance::new(self.load2.0.re, self.load2.0.im)?;
        let plan = LoadSwitchPlan::new(z1, z2, self.k, self.t)?;
        let training = zadoff_chu(self.t, self.k, self.root)?;
        ReceiverScenario::new(antenna, plan, training, noise_var)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSection {
    /// Ratio values to study; each gets its own block of records.
    pub f_values: Vec<ComplexSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    /// Packet counts at which the two prior arms are compared.
    pub l_values: Vec<usize>,
}

/// One study: grid, estimators, prior and mode-specific sections.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Packets per trial; required for sweep and bias modes.
    #[serde(default)]
    pub l: Option<usize>,
    pub snr_db: Vec<f64>,
    /// Estimator names; empty picks a mode-appropriate default.
    #[serde(default)]
    pub estimators: Vec<String>,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_override: Option<ComplexSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationSection>,
}

fn default_seed() -> u64 {
    1
}

/// A fully assembled study, ready to run.
#[derive(Debug)]
pub enum Study {
    Sweep(SweepConfig),
    Bias(SweepConfig, Vec<Complex64>),
    Correlation(SweepConfig, Vec<usize>),
}

pub fn parse_estimator(name: &str) -> Result<EstimatorKind, String> {
    match name {
        "general" | "map_ml_general" => Ok(EstimatorKind::General),
        "iid_quadratic" => Ok(EstimatorKind::IidQuadratic),
        "low_noise" => Ok(EstimatorKind::LowNoise),
        "single_packet" => Ok(EstimatorKind::SinglePacket),
        "slow_fading" => Ok(EstimatorKind::SlowFading),
        "consistent" => Ok(EstimatorKind::Consistent),
        other => Err(format!(
            "unknown estimator {other:?}; expected general, iid_quadratic, low_noise, \
             single_packet, slow_fading, or consistent"
        )),
    }
}

impl RunConfig {
    pub fn study(&self) -> Result<Study, String> {
        let scenario_cfg = self.scenario.clone().unwrap_or_default();
        // placeholder noise level; the sweep re-derives it per SNR point
        let scenario = scenario_cfg.build(1.0).map_err(|e| e.to_string())?;
        let prior = self.prior.to_spec()?;
        let l = match self.mode {
            // the correlation study supplies packet counts itself
            Mode::Correlation => self.l.unwrap_or(1),
            Mode::Sweep | Mode::Bias => self.l.ok_or("missing key `l` (packets per trial)")?,
        };
        let mut sweep = SweepConfig::new(scenario, prior, l);
        sweep.snr_db = self.snr_db.clone();
        sweep.trials = self.trials;
        sweep.seed = self.seed;
        if !self.estimators.is_empty() {
            sweep.estimators = self
                .estimators
                .iter()
                .map(|n| parse_estimator(n))
                .collect::<Result<_, _>>()?;
        } else if self.mode == Mode::Bias {
            sweep.estimators = vec![EstimatorKind::IidQuadratic, EstimatorKind::Consistent];
        }
        if let Some(f) = self.f_override {
            sweep.f_override = Some(f.0);
        }
        if let Some(t) = self.trim_fraction {
            sweep.trim_fraction = t;
        }
        if let Some(t) = self.failure_threshold {
            sweep.failure_threshold = t;
        }
        match self.mode {
            Mode::Sweep => Ok(Study::Sweep(sweep)),
            Mode::Bias => {
                let section = self
                    .bias
                    .as_ref()
                    .ok_or("mode = \"bias\" needs a [bias] section with f_values")?;
                if section.f_values.is_empty() {
                    return Err("bias.f_values must not be empty".to_string());
                }
                Ok(Study::Bias(
                    sweep,
                    section.f_values.iter().map(|c| c.0).collect(),
                ))
            }
            Mode::Correlation => {
                let section = self
                    .correlation
                    .as_ref()
                    .ok_or("mode = \"correlation\" needs a [correlation] section with l_values")?;
                if section.l_values.is_empty() {
                    return Err("correlation.l_values must not be empty".to_string());
                }
                Ok(Study::Correlation(sweep, section.l_values.clone()))
            }
        }
    }
}

/// Builds a channel prior from command-line pieces.
pub fn build_prior(
    kind: &str,
    l: usize,
    sigma_h2: f64,
    corr: Option<f64>,
) -> Result<ChannelPrior, String> {
    let spec = PriorConfig {
        kind: kind.to_string(),
        sigma_h2,
        r: corr,
    }
    .to_spec()?;
    spec.build(l).map_err(|e| e.to_string())
}

/// On-disk form written by the training generator: a scenario skeleton plus
/// the expanded symbols, reusable as a `[scenario]` section after dropping
/// the symbol list.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingFile {
    pub antenna: ComplexSpec,
    pub load1: ComplexSpec,
    pub load2: ComplexSpec,
    pub t: usize,
    pub k: usize,
    pub root: u64,
    pub symbols: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_text_forms_parse() {
        let cases = [
            ("0.986+0.2445j", Complex64::new(0.986, 0.2445)),
            ("1-2j", Complex64::new(1.0, -2.0)),
            ("-3.5", Complex64::new(-3.5, 0.0)),
            ("2.5j", Complex64::new(0.0, 2.5)),
            ("-j", Complex64::new(0.0, -1.0)),
            ("j", Complex64::new(0.0, 1.0)),
            ("1e-3+2e-4j", Complex64::new(1e-3, 2e-4)),
            (" 73 + 42.5 j ", Complex64::new(73.0, 42.5)),
        ];
        for (text, want) in cases {
            assert_eq!(parse_complex_text(text), Some(want), "{text}");
        }
        assert_eq!(parse_complex_text(""), None);
        assert_eq!(parse_complex_text("fast"), None);
        assert_eq!(parse_complex_text("1+2k"), None);
    }

    #[test]
    fn complex_spec_accepts_all_forms_and_emits_pairs() {
        #[derive(Deserialize, Serialize)]
        struct Doc {
            a: ComplexSpec,
            b: ComplexSpec,
            c: ComplexSpec,
        }
        let doc: Doc = toml::from_str(
            r#"
            a = [73.0, 42.5]
            b = "50+20j"
            c = 50
            "#,
        )
        .unwrap();
        assert_eq!(doc.a.0, Complex64::new(73.0, 42.5));
        assert_eq!(doc.b.0, Complex64::new(50.0, 20.0));
        assert_eq!(doc.c.0, Complex64::new(50.0, 0.0));
        let out = toml::to_string(&doc).unwrap();
        assert!(out.contains("a = [73.0, 42.5]"), "{out}");
        assert!(out.contains("b = [50.0, 20.0]"), "{out}");
    }

    #[test]
    fn minimal_sweep_config_builds() {
        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "sweep"
            trials = 100
            l = 4
            snr_db = [0.0, 10.0]
            "#,
        )
        .unwrap();
        match cfg.study().unwrap() {
            Study::Sweep(s) => {
                assert_eq!(s.l, 4);
                assert_eq!(s.trials, 100);
                assert_eq!(s.seed, 1);
                assert_eq!(s.estimators, vec![EstimatorKind::IidQuadratic]);
                assert!((s.scenario.f() - Complex64::new(0.986, 0.2445)).norm() < 1e-3);
            }
            _ => panic!("expected a plain sweep"),
        }
    }

    #[test]
    fn mode_sections_are_enforced() {
        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "bias"
            trials = 10
            l = 5
            snr_db = [0.0]
            "#,
        )
        .unwrap();
        let err = cfg.study().unwrap_err();
        assert!(err.contains("f_values"), "{err}");

        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "correlation"
            trials = 10
            snr_db = [10.0]
            [correlation]
            l_values = [2, 5]
            "#,
        )
        .unwrap();
        assert!(matches!(cfg.study().unwrap(), Study::Correlation(_, ls) if ls == vec![2, 5]));
    }

    #[test]
    fn unknown_keys_and_missing_keys_name_themselves() {
        let err = toml::from_str::<RunConfig>("mode = \"sweep\"\nsnr_db = [1.0]\nl = 2")
            .unwrap_err()
            .to_string();
        assert!(err.contains("trials"), "{err}");
        let err = toml::from_str::<RunConfig>(
            "mode = \"sweep\"\ntrials = 5\nl = 2\nsnr_db = [1.0]\ntrails = 7",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("trails"), "{err}");
    }

    #[test]
    fn estimator_names_round_trip_the_library_labels() {
        for kind in [
            EstimatorKind::General,
            EstimatorKind::IidQuadratic,
            EstimatorKind::LowNoise,
            EstimatorKind::SinglePacket,
            EstimatorKind::SlowFading,
            EstimatorKind::Consistent,
        ] {
            assert_eq!(parse_estimator(&kind.method().to_string()).unwrap(), kind);
        }
        assert_eq!(
            parse_estimator("map_ml_general").unwrap(),
            EstimatorKind::General
        );
        assert!(parse_estimator("fastest").is_err());
    }
}
