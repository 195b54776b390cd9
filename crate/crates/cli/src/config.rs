//! Key-value experiment config parser.
//!
//! The grammar is line-oriented with four sections:
//!
//! ```text
//! [domain]
//! grid = torus{nx=128,ny=128,lx=1,ly=1}        # or polar{nr=..,nang=..,rin=..,rout=..}
//! [potential]
//! spec = checkerboard{cell=0.25,jump=1}
//! [weight]
//! spec = radial_inverse{}                       # radial_exp{c=..} | glued_exp{..}
//! [experiment]
//! kind = local_to_global                        # carleman_ratio | holder_scaling
//! h_ladder = 0.2,0.1,0.05,0.025
//! kappa = 0.5
//! ...
//! ```
//!
//! Six fields have defaults (domain.grid, h_ladder, kappa, delta, d, slack);
//! every default that fires is flagged in the echo, nothing defaults
//! silently. `kind`, `energy`, `u`, `support`, `family`, `alpha(s)` have no
//! defaults: the kinds that need them reject configs that omit them.

use std::collections::BTreeMap;
use std::fmt;

use carleman_core::estimates::{ExperimentConfig, ExperimentKind, FamilySpec, RegionSpec};
use carleman_core::grid::GridSpec;
use carleman_core::potentials::{PotentialSpec, TrigTerm};
use carleman_core::weights::{WeightFamily, WeightSpec};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, key `{}`: {}", self.line, self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

fn err<T>(line: usize, key: &str, message: impl Into<String>) -> CResult<T> {
    Err(ConfigError { line, key: key.to_string(), message: message.into() })
}

const POTENTIAL_CATALOG: &str =
    "constant, trig, weierstrass, checkerboard, piecewise_random";

/// Parse outcome: the resolved config, the echo text, and the names of the
/// fields that were filled from the default table.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub echo: String,
    pub defaulted: Vec<&'static str>,
    pub config_hash: String,
}

struct RawEntry {
    line: usize,
    value: String,
}

/// Parse the documented key-value grammar into a fully resolved config.
pub fn parse_config(text: &str) -> CResult<ResolvedConfig> {
    let mut entries: BTreeMap<String, RawEntry> = BTreeMap::new();
    let mut section = String::new();
    let mut seen_sections = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        if let Some(name) = stripped.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            match name {
                "domain" | "potential" | "weight" | "experiment" => {
                    section = name.to_string();
                    seen_sections.push(name.to_string());
                }
                other => {
                    return err(line, other, "unknown section (expected [domain], [potential], [weight], [experiment])");
                }
            }
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return err(line, stripped, "expected `key = value`");
        };
        let key = key.trim();
        let value = value.trim();
        if section.is_empty() {
            return err(line, key, "key appears before any section header");
        }
        let allowed: &[&str] = match section.as_str() {
            "domain" => &["grid"],
            "potential" => &["spec"],
            "weight" => &["spec"],
            "experiment" => &[
                "kind", "h_ladder", "kappa", "delta", "d", "slack", "energy", "u", "support",
                "family", "alpha", "alphas",
            ],
            _ => unreachable!(),
        };
        if !allowed.contains(&key) {
            return err(line, key, format!("unknown key in [{section}] (allowed: {})", allowed.join(", ")));
        }
        let full = format!("{section}.{key}");
        if entries.contains_key(&full) {
            return err(line, key, "duplicate key");
        }
        entries.insert(full, RawEntry { line, value: value.to_string() });
    }

    if !seen_sections.iter().any(|s| s == "potential") || !entries.contains_key("potential.spec") {
        return err(0, "potential.spec", "missing required field (a [potential] section with `spec = ...`)");
    }

    let mut defaulted: Vec<&'static str> = Vec::new();

    // domain.grid
    let grid = match entries.get("domain.grid") {
        Some(e) => parse_grid(e.line, &e.value)?,
        None => {
            defaulted.push("domain.grid");
            GridSpec::Torus { nx: 128, ny: 128, lx: 1.0, ly: 1.0 }
        }
    };

    let pot_entry = entries.get("potential.spec").unwrap();
    let potential = parse_potential(pot_entry.line, &pot_entry.value)?;

    let weight = match entries.get("weight.spec") {
        Some(e) => Some(parse_weight(e.line, &e.value)?),
        None => None,
    };

    let mut cfg = ExperimentConfig::new(grid, potential);
    cfg.weight = weight;

    match entries.get("experiment.kind") {
        Some(e) => {
            cfg.kind = Some(match ExperimentKind::parse(&e.value) {
                Some(k) => k,
                None => {
                    return err(
                        e.line,
                        "kind",
                        "unknown experiment kind (expected carleman_ratio, local_to_global, holder_scaling)",
                    )
                }
            });
        }
        None => cfg.kind = None,
    }

    match entries.get("experiment.h_ladder") {
        Some(e) => cfg.h_ladder = parse_f64_list(e.line, "h_ladder", &e.value)?,
        None => defaulted.push("experiment.h_ladder"),
    }
    match entries.get("experiment.kappa") {
        Some(e) => cfg.kappa = parse_ranged(e.line, "kappa", &e.value, 0.0, 1.0)?,
        None => defaulted.push("experiment.kappa"),
    }
    match entries.get("experiment.delta") {
        Some(e) => cfg.delta = parse_ranged(e.line, "delta", &e.value, 0.0, 1.0)?,
        None => defaulted.push("experiment.delta"),
    }
    match entries.get("experiment.d") {
        Some(e) => {
            let d = parse_f64(e.line, "d", &e.value)?;
            if d < 0.0 {
                return err(e.line, "d", format!("must be >= 0, got {d}"));
            }
            cfg.d = d;
        }
        None => defaulted.push("experiment.d"),
    }
    match entries.get("experiment.slack") {
        Some(e) => {
            let s = parse_f64(e.line, "slack", &e.value)?;
            if s < 0.0 {
                return err(e.line, "slack", format!("must be >= 0, got {s}"));
            }
            cfg.slack = s;
        }
        None => defaulted.push("experiment.slack"),
    }
    if let Some(e) = entries.get("experiment.energy") {
        cfg.energy = Some(parse_f64(e.line, "energy", &e.value)?);
    }
    if let Some(e) = entries.get("experiment.u") {
        cfg.u_region = Some(parse_region(e.line, "u", &e.value)?);
    }
    if let Some(e) = entries.get("experiment.support") {
        cfg.support = Some(parse_region(e.line, "support", &e.value)?);
    }
    if let Some(e) = entries.get("experiment.family") {
        cfg.family = Some(parse_family(e.line, &e.value)?);
    }
    if let Some(e) = entries.get("experiment.alpha") {
        cfg.alpha = Some(parse_alpha(e.line, "alpha", &e.value)?);
    }
    if let Some(e) = entries.get("experiment.alphas") {
        cfg.alphas = parse_f64_list(e.line, "alphas", &e.value)?
            .into_iter()
            .map(|a| {
                if a > 0.0 && a <= 1.0 {
                    Ok(a)
                } else {
                    err(e.line, "alphas", format!("alpha must be in (0,1], got {a}"))
                }
            })
            .collect::<CResult<Vec<f64>>>()?;
    }

    if let Err(e) = cfg.validate() {
        return err(0, "config", e.to_string());
    }

    let echo = render_echo(&cfg, &defaulted);
    let config_hash = hex_digest(&echo);
    cfg.config_hash = config_hash.clone();
    Ok(ResolvedConfig { config: cfg, echo, defaulted, config_hash })
}

fn parse_alpha(line: usize, key: &str, value: &str) -> CResult<f64> {
    let a = parse_f64(line, key, value)?;
    if a > 0.0 && a <= 1.0 {
        Ok(a)
    } else {
        err(line, key, format!("alpha must be in (0,1], got {a}"))
    }
}

fn parse_ranged(line: usize, key: &str, value: &str, lo: f64, hi: f64) -> CResult<f64> {
    let v = parse_f64(line, key, value)?;
    if v > lo && v <= hi {
        Ok(v)
    } else {
        err(line, key, format!("must be in ({lo},{hi}], got {v}"))
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> CResult<f64> {
    value.trim().parse::<f64>().map_err(|_| ConfigError {
        line,
        key: key.to_string(),
        message: format!("expected a number, got `{value}`"),
    })
}

fn parse_f64_list(line: usize, key: &str, value: &str) -> CResult<Vec<f64>> {
    value
        .split(',')
        .map(|p| parse_f64(line, key, p))
        .collect()
}

/// Split `name{k=v,...}` into the head and its pairs, honoring parentheses.
fn parse_braced<'a>(line: usize, key: &str, value: &'a str) -> CResult<(&'a str, Vec<(&'a str, &'a str)>)> {
    let Some(open) = value.find('{') else {
        return err(line, key, format!("expected `name{{...}}`, got `{value}`"));
    };
    if !value.ends_with('}') {
        return err(line, key, format!("missing closing brace in `{value}`"));
    }
    let name = value[..open].trim();
    let body = &value[open + 1..value.len() - 1];
    let mut pairs = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let bytes = body.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                let piece = body[start..i].trim();
                if !piece.is_empty() {
                    pairs.push(piece);
                }
                start = i + 1;
            }
            _ => {}
        }
    }
    let tail = body[start..].trim();
    if !tail.is_empty() {
        pairs.push(tail);
    }
    let mut kv = Vec::new();
    for p in pairs {
        let Some((k, v)) = p.split_once('=') else {
            return err(line, key, format!("expected `k=v` inside braces, got `{p}`"));
        };
        kv.push((k.trim(), v.trim()));
    }
    Ok((name, kv))
}

fn lookup<'a>(
    line: usize,
    key: &str,
    kv: &[(&'a str, &'a str)],
    want: &str,
) -> CResult<&'a str> {
    kv.iter()
        .find(|(k, _)| *k == want)
        .map(|(_, v)| *v)
        .ok_or_else(|| ConfigError {
            line,
            key: key.to_string(),
            message: format!("missing field `{want}`"),
        })
}

fn lookup_f64(line: usize, key: &str, kv: &[(&str, &str)], want: &str) -> CResult<f64> {
    parse_f64(line, key, lookup(line, key, kv, want)?)
}

fn lookup_usize(line: usize, key: &str, kv: &[(&str, &str)], want: &str) -> CResult<usize> {
    let v = lookup(line, key, kv, want)?;
    v.parse::<usize>().map_err(|_| ConfigError {
        line,
        key: key.to_string(),
        message: format!("expected a nonnegative integer for `{want}`, got `{v}`"),
    })
}

fn lookup_i32(line: usize, key: &str, kv: &[(&str, &str)], want: &str) -> CResult<i32> {
    let v = lookup(line, key, kv, want)?;
    v.parse::<i32>().map_err(|_| ConfigError {
        line,
        key: key.to_string(),
        message: format!("expected an integer for `{want}`, got `{v}`"),
    })
}

fn lookup_u64(line: usize, key: &str, kv: &[(&str, &str)], want: &str) -> CResult<u64> {
    let v = lookup(line, key, kv, want)?;
    v.parse::<u64>().map_err(|_| ConfigError {
        line,
        key: key.to_string(),
        message: format!("expected an unsigned integer for `{want}`, got `{v}`"),
    })
}

fn parse_tuple(line: usize, key: &str, value: &str) -> CResult<(f64, f64)> {
    let inner = value
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| ConfigError {
            line,
            key: key.to_string(),
            message: format!("expected `(x,y)`, got `{value}`"),
        })?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return err(line, key, format!("expected two components in `{value}`"));
    }
    Ok((parse_f64(line, key, parts[0])?, parse_f64(line, key, parts[1])?))
}

fn parse_grid(line: usize, value: &str) -> CResult<GridSpec> {
    let (name, kv) = parse_braced(line, "grid", value)?;
    match name {
        "torus" => Ok(GridSpec::Torus {
            nx: lookup_usize(line, "grid", &kv, "nx")?,
            ny: lookup_usize(line, "grid", &kv, "ny")?,
            lx: lookup_f64(line, "grid", &kv, "lx")?,
            ly: lookup_f64(line, "grid", &kv, "ly")?,
        }),
        "polar" => Ok(GridSpec::Polar {
            nr: lookup_usize(line, "grid", &kv, "nr")?,
            nang: lookup_usize(line, "grid", &kv, "nang")?,
            r_inner: lookup_f64(line, "grid", &kv, "rin")?,
            r_outer: lookup_f64(line, "grid", &kv, "rout")?,
        }),
        other => err(line, "grid", format!("unknown grid kind `{other}` (expected torus, polar)")),
    }
}

fn parse_potential(line: usize, value: &str) -> CResult<PotentialSpec> {
    let (name, kv) = parse_braced(line, "spec", value)?;
    let spec = match name {
        "constant" => PotentialSpec::Constant { value: lookup_f64(line, "spec", &kv, "value")? },
        "trig" => {
            if let Ok(terms_str) = lookup(line, "spec", &kv, "terms") {
                let mut terms = Vec::new();
                for t in terms_str.split('|') {
                    let inner = t
                        .trim()
                        .strip_prefix('(')
                        .and_then(|s| s.strip_suffix(')'))
                        .ok_or_else(|| ConfigError {
                            line,
                            key: "spec".into(),
                            message: format!("expected `(amp,kx,ky,phase)`, got `{t}`"),
                        })?;
                    let parts: Vec<&str> = inner.split(',').collect();
                    if parts.len() != 4 {
                        return err(line, "spec", format!("expected 4 components in `{t}`"));
                    }
                    terms.push(TrigTerm {
                        amp: parse_f64(line, "spec", parts[0])?,
                        kx: parts[1].trim().parse().map_err(|_| ConfigError {
                            line,
                            key: "spec".into(),
                            message: format!("bad kx in `{t}`"),
                        })?,
                        ky: parts[2].trim().parse().map_err(|_| ConfigError {
                            line,
                            key: "spec".into(),
                            message: format!("bad ky in `{t}`"),
                        })?,
                        phase: parse_f64(line, "spec", parts[3])?,
                    });
                }
                PotentialSpec::Trig { terms }
            } else {
                PotentialSpec::Trig {
                    terms: vec![TrigTerm {
                        amp: lookup_f64(line, "spec", &kv, "amp")?,
                        kx: lookup_i32(line, "spec", &kv, "kx")?,
                        ky: lookup_i32(line, "spec", &kv, "ky")?,
                        phase: lookup_f64(line, "spec", &kv, "phase")?,
                    }],
                }
            }
        }
        "weierstrass" => {
            let alpha = lookup_f64(line, "spec", &kv, "alpha")?;
            if !(alpha > 0.0 && alpha <= 1.0) {
                return err(line, "alpha", format!("alpha must be in (0,1], got {alpha}"));
            }
            PotentialSpec::Weierstrass {
                alpha,
                levels: lookup_usize(line, "spec", &kv, "levels")? as u32,
            }
        }
        "checkerboard" => PotentialSpec::Checkerboard {
            cell: lookup_f64(line, "spec", &kv, "cell")?,
            jump: lookup_f64(line, "spec", &kv, "jump")?,
        },
        "piecewise_random" => PotentialSpec::PiecewiseRandom {
            cell: lookup_f64(line, "spec", &kv, "cell")?,
            amplitude: lookup_f64(line, "spec", &kv, "amplitude")?,
            seed: lookup_u64(line, "spec", &kv, "seed")?,
        },
        other => {
            return err(
                line,
                "spec",
                format!("unknown potential variant `{other}` (catalog: {POTENTIAL_CATALOG})"),
            )
        }
    };
    if let Err(e) = spec.validate() {
        return err(line, "spec", e.to_string());
    }
    Ok(spec)
}

fn parse_weight(line: usize, value: &str) -> CResult<WeightSpec> {
    let (name, kv) = parse_braced(line, "spec", value)?;
    let spec = match name {
        "radial_exp" => WeightSpec::radial_exp(lookup_f64(line, "spec", &kv, "c")?),
        "radial_inverse" => WeightSpec::radial_inverse(),
        "glued_exp" => {
            let c = lookup_f64(line, "spec", &kv, "c")?;
            let x1 = parse_tuple(line, "spec", lookup(line, "spec", &kv, "x1")?)?;
            let x2 = parse_tuple(line, "spec", lookup(line, "spec", &kv, "x2")?)?;
            let has = |k: &str| kv.iter().any(|(kk, _)| *kk == k);
            if has("inner1") {
                WeightSpec::new(WeightFamily::GluedExp {
                    c,
                    x1,
                    x2,
                    inner1: lookup_f64(line, "spec", &kv, "inner1")?,
                    outer1: lookup_f64(line, "spec", &kv, "outer1")?,
                    inner2: lookup_f64(line, "spec", &kv, "inner2")?,
                    outer2: lookup_f64(line, "spec", &kv, "outer2")?,
                })
            } else if has("inner") {
                let inner = lookup_f64(line, "spec", &kv, "inner")?;
                let outer = lookup_f64(line, "spec", &kv, "outer")?;
                WeightSpec::new(WeightFamily::GluedExp {
                    c,
                    x1,
                    x2,
                    inner1: inner,
                    outer1: outer,
                    inner2: inner,
                    outer2: outer,
                })
            } else {
                WeightSpec::glued_default(c, x1, x2)
            }
        }
        other => {
            return err(
                line,
                "spec",
                format!("unknown weight variant `{other}` (expected radial_exp, radial_inverse, glued_exp)"),
            )
        }
    };
    if let Err(e) = spec.validate() {
        return err(line, "spec", e.to_string());
    }
    Ok(spec)
}

fn parse_region(line: usize, key: &str, value: &str) -> CResult<RegionSpec> {
    let (name, kv) = parse_braced(line, key, value)?;
    match name {
        "ball" => Ok(RegionSpec::Ball {
            cx: lookup_f64(line, key, &kv, "cx")?,
            cy: lookup_f64(line, key, &kv, "cy")?,
            r: lookup_f64(line, key, &kv, "r")?,
        }),
        "annulus" => Ok(RegionSpec::Annulus {
            r1: lookup_f64(line, key, &kv, "r1")?,
            r2: lookup_f64(line, key, &kv, "r2")?,
        }),
        other => err(line, key, format!("unknown region `{other}` (expected ball, annulus)")),
    }
}

fn parse_family(line: usize, value: &str) -> CResult<FamilySpec> {
    let (name, kv) = parse_braced(line, "family", value)?;
    match name {
        "gaussian" => Ok(FamilySpec::Gaussian {
            count: lookup_usize(line, "family", &kv, "count")?,
            width: lookup_f64(line, "family", &kv, "width")?,
        }),
        "band_limited" => Ok(FamilySpec::BandLimited {
            count: lookup_usize(line, "family", &kv, "count")?,
            max_freq: lookup_i32(line, "family", &kv, "max_freq")?,
        }),
        "plane_wave" => Ok(FamilySpec::PlaneWave {
            kx: lookup_i32(line, "family", &kv, "kx")?,
            ky: lookup_i32(line, "family", &kv, "ky")?,
        }),
        "eigen" => Ok(FamilySpec::Eigen {
            target: lookup_f64(line, "family", &kv, "target")?,
            count: lookup_usize(line, "family", &kv, "count")?,
            tol: lookup_f64(line, "family", &kv, "tol")?,
        }),
        other => err(
            line,
            "family",
            format!("unknown family `{other}` (expected gaussian, band_limited, plane_wave, eigen)"),
        ),
    }
}

// ---------------------------------------------------------------------------
// Echo / canonical serialization
// ---------------------------------------------------------------------------

fn region_text(r: &RegionSpec) -> String {
    match *r {
        RegionSpec::Ball { cx, cy, r } => format!("ball{{cx={cx},cy={cy},r={r}}}"),
        RegionSpec::Annulus { r1, r2 } => format!("annulus{{r1={r1},r2={r2}}}"),
    }
}

fn family_text(f: &FamilySpec) -> String {
    match f {
        FamilySpec::Gaussian { count, width } => format!("gaussian{{count={count},width={width}}}"),
        FamilySpec::BandLimited { count, max_freq } => {
            format!("band_limited{{count={count},max_freq={max_freq}}}")
        }
        FamilySpec::PlaneWave { kx, ky } => format!("plane_wave{{kx={kx},ky={ky}}}"),
        FamilySpec::Eigen { target, count, tol } => {
            format!("eigen{{target={target},count={count},tol={tol}}}")
        }
    }
}

// The δ rescaling is the experiment-level `delta` key; the weight text only
// carries the family.
fn weight_text(w: &WeightSpec) -> String {
    match &w.family {
        WeightFamily::RadialExp { c } => format!("radial_exp{{c={c}}}"),
        WeightFamily::RadialInverse => "radial_inverse{}".to_string(),
        WeightFamily::GluedExp { c, x1, x2, inner1, outer1, inner2, outer2 } => format!(
            "glued_exp{{c={c},x1=({},{}),x2=({},{}),inner1={inner1},outer1={outer1},inner2={inner2},outer2={outer2}}}",
            x1.0, x1.1, x2.0, x2.1
        ),
    }
}

fn list_text(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical echo of the resolved config; defaulted fields are flagged.
pub fn render_echo(cfg: &ExperimentConfig, defaulted: &[&'static str]) -> String {
    let flag = |name: &str| if defaulted.contains(&name) { " [default]" } else { "" };
    let mut lines = Vec::new();
    lines.push(format!(
        "domain.grid = {}{}",
        carleman_core::estimates::grid_text(&cfg.grid),
        flag("domain.grid")
    ));
    lines.push(format!("potential.spec = {}", cfg.potential));
    if let Some(w) = &cfg.weight {
        lines.push(format!("weight.spec = {}", weight_text(w)));
    }
    if let Some(k) = cfg.kind {
        lines.push(format!("experiment.kind = {}", k.as_str()));
    }
    lines.push(format!(
        "experiment.h_ladder = {}{}",
        list_text(&cfg.h_ladder),
        flag("experiment.h_ladder")
    ));
    lines.push(format!("experiment.kappa = {}{}", cfg.kappa, flag("experiment.kappa")));
    lines.push(format!("experiment.delta = {}{}", cfg.delta, flag("experiment.delta")));
    lines.push(format!("experiment.d = {}{}", cfg.d, flag("experiment.d")));
    lines.push(format!("experiment.slack = {}{}", cfg.slack, flag("experiment.slack")));
    if let Some(e) = cfg.energy {
        lines.push(format!("experiment.energy = {e}"));
    }
    if let Some(u) = &cfg.u_region {
        lines.push(format!("experiment.u = {}", region_text(u)));
    }
    if let Some(s) = &cfg.support {
        lines.push(format!("experiment.support = {}", region_text(s)));
    }
    if let Some(f) = &cfg.family {
        lines.push(format!("experiment.family = {}", family_text(f)));
    }
    if let Some(a) = cfg.alpha {
        lines.push(format!("experiment.alpha = {a}"));
    }
    if !cfg.alphas.is_empty() {
        lines.push(format!("experiment.alphas = {}", list_text(&cfg.alphas)));
    }
    lines.join("\n") + "\n"
}

/// Emit the echo back as a parseable config file (the round-trip form).
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str("[domain]\n");
    out.push_str(&format!("grid = {}\n", carleman_core::estimates::grid_text(&cfg.grid)));
    out.push_str("[potential]\n");
    out.push_str(&format!("spec = {}\n", cfg.potential));
    if let Some(w) = &cfg.weight {
        out.push_str("[weight]\n");
        out.push_str(&format!("spec = {}\n", weight_text(w)));
    }
    out.push_str("[experiment]\n");
    if let Some(k) = cfg.kind {
        out.push_str(&format!("kind = {}\n", k.as_str()));
    }
    out.push_str(&format!("h_ladder = {}\n", list_text(&cfg.h_ladder)));
    out.push_str(&format!("kappa = {}\n", cfg.kappa));
    out.push_str(&format!("delta = {}\n", cfg.delta));
    out.push_str(&format!("d = {}\n", cfg.d));
    out.push_str(&format!("slack = {}\n", cfg.slack));
    if let Some(e) = cfg.energy {
        out.push_str(&format!("energy = {e}\n"));
    }
    if let Some(u) = &cfg.u_region {
        out.push_str(&format!("u = {}\n", region_text(u)));
    }
    if let Some(s) = &cfg.support {
        out.push_str(&format!("support = {}\n", region_text(s)));
    }
    if let Some(f) = &cfg.family {
        out.push_str(&format!("family = {}\n", family_text(f)));
    }
    if let Some(a) = cfg.alpha {
        out.push_str(&format!("alpha = {a}\n"));
    }
    if !cfg.alphas.is_empty() {
        out.push_str(&format!("alphas = {}\n", list_text(&cfg.alphas)));
    }
    out
}

pub fn hex_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
