//! System variants, physical parameters and formfactors.
//!
//! All quantities are in natural units (ħ = c = μ0 = 1): energies,
//! frequencies and wavenumbers are inverse lengths, so every number here is
//! a power of the length unit.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Documentation record for the unit convention used throughout.
pub struct UnitsNote;

impl UnitsNote {
    pub const CONVENTION: &'static str = "natural units, all quantities in powers of meters";
}

/// Which qubit realisation a model describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Spin,
    TwoLevelAtom,
    DipoleAtom,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Spin => "spin",
            Variant::TwoLevelAtom => "two-level",
            Variant::DipoleAtom => "dipole",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spin" => Ok(Variant::Spin),
            "two-level" | "twolevel" | "two_level" | "twolevelatom" => Ok(Variant::TwoLevelAtom),
            "dipole" | "dipoleatom" | "dipole-atom" => Ok(Variant::DipoleAtom),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }

    /// Dimension of the excited-state subspace.
    pub fn dim_e(self) -> u32 {
        match self {
            Variant::DipoleAtom => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FormFactorFamily {
    HydrogenSpin,
    HydrogenDipole,
    Tabulated,
}

impl FormFactorFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hydrogen-spin" | "hydrogenspin" | "spin" => Ok(FormFactorFamily::HydrogenSpin),
            "hydrogen-dipole" | "hydrogendipole" | "dipole" => Ok(FormFactorFamily::HydrogenDipole),
            "tabulated" | "table" => Ok(FormFactorFamily::Tabulated),
            other => Err(Error::Config(format!("unknown formfactor family '{other}'"))),
        }
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolant through sampled (k, g).
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    k: Vec<f64>,
    g: Vec<f64>,
    slope: Vec<f64>,
}

impl Table {
    pub fn new(k: Vec<f64>, g: Vec<f64>) -> Result<Table> {
        if k.len() != g.len() || k.len() < 2 {
            return Err(Error::InvalidParameter("formfactor table needs at least two (k, g) rows".into()));
        }
        if k.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("formfactor table contains non-finite values".into()));
        }
        if k[0] < 0.0 || k.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("formfactor table k must be non-negative and strictly increasing".into()));
        }
        if g.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("formfactor table g must be non-negative".into()));
        }
        if k[0] == 0.0 && g[0] != 0.0 {
            return Err(Error::Integrability("g(0) must vanish for g²/k² to be integrable".into()));
        }
        let n = k.len();
        let secant: Vec<f64> = (0..n - 1).map(|i| (g[i + 1] - g[i]) / (k[i + 1] - k[i])).collect();
        let mut slope = vec![0.0; n];
        slope[0] = secant[0];
        slope[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            slope[i] = if secant[i - 1] * secant[i] <= 0.0 { 0.0 } else { 0.5 * (secant[i - 1] + secant[i]) };
        }
        for i in 0..n - 1 {
            if secant[i] == 0.0 {
                slope[i] = 0.0;
                slope[i + 1] = 0.0;
                continue;
            }
            let a = slope[i] / secant[i];
            let b = slope[i + 1] / secant[i];
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                slope[i] = t * a * secant[i];
                slope[i + 1] = t * b * secant[i];
            }
        }
        Ok(Table { k, g, slope })
    }

    pub fn knots(&self) -> &[f64] {
        &self.k
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.k.len();
        if x < self.k[0] || x > self.k[n - 1] {
            return 0.0;
        }
        let i = match self.k.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.g[i],
            Err(i) => i - 1,
        };
        let h = self.k[i + 1] - self.k[i];
        let t = (x - self.k[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * self.g[i] + h10 * h * self.slope[i] + h01 * self.g[i + 1] + h11 * h * self.slope[i + 1]).max(0.0)
    }
}

/// The function k ↦ g(k) coupling the qubit to the field mode k.
#[derive(Clone, Debug, PartialEq)]
pub struct FormFactor {
    pub family: FormFactorFamily,
    /// μ for the spin family, d for the dipole family; small-k slope
    /// coefficient times π√3 for tables.
    pub coupling: f64,
    pub a0: f64,
    pub table: Option<Arc<Table>>,
}

/// Hydrogen 2P-1S dipole moment for charge `e` and Bohr radius `a0`.
pub fn hydrogen_dipole_moment(e: f64, a0: f64) -> f64 {
    2f64.powf(7.5) * e * a0 / 243.0
}

impl FormFactor {
    pub fn hydrogen_spin(mu: f64, a0: f64) -> Result<FormFactor> {
        check_a0(a0)?;
        check_finite("mu", mu)?;
        Ok(FormFactor { family: FormFactorFamily::HydrogenSpin, coupling: mu, a0, table: None })
    }

    pub fn hydrogen_dipole(d: f64, a0: f64) -> Result<FormFactor> {
        check_a0(a0)?;
        check_finite("d", d)?;
        Ok(FormFactor { family: FormFactorFamily::HydrogenDipole, coupling: d, a0, table: None })
    }

    /// Dipole family with d computed from the hydrogen wave functions.
    pub fn hydrogen_dipole_from_charge(e: f64, a0: f64) -> Result<FormFactor> {
        FormFactor::hydrogen_dipole(hydrogen_dipole_moment(e, a0), a0)
    }

    pub fn tabulated(k: Vec<f64>, g: Vec<f64>) -> Result<FormFactor> {
        let table = Table::new(k, g)?;
        let (k1, g1) = table
            .k
            .iter()
            .zip(&table.g)
            .find(|(k, _)| **k > 0.0)
            .map(|(k, g)| (*k, *g))
            .unwrap_or((1.0, 0.0));
        let coupling = PI * 3f64.sqrt() * g1 / (k1 * k1);
        let a0 = 1.0 / table.k[table.k.len() - 1];
        Ok(FormFactor { family: FormFactorFamily::Tabulated, coupling, a0, table: Some(Arc::new(table)) })
    }

    /// Reads a two-column CSV table (k, g); a header row is optional.
    pub fn tabulated_from_csv(path: &Path) -> Result<FormFactor> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Config(format!("cannot read table {}: {e}", path.display())))?;
        let (mut ks, mut gs) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("table {}: {e}", path.display())))?;
            if rec.len() < 2 {
                return Err(Error::Config(format!("table {} row {} needs two columns", path.display(), row + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(k), Ok(g)) => {
                    ks.push(k);
                    gs.push(g);
                }
                _ if row == 0 => continue,
                _ => return Err(Error::Config(format!("table {} row {} is not numeric", path.display(), row + 1))),
            }
        }
        FormFactor::tabulated(ks, gs)
    }

    /// g(k) without the domain check.
    #[inline]
    pub fn g(&self, k: f64) -> f64 {
        match self.family {
            FormFactorFamily::HydrogenSpin => {
                let s = 1.0 + 0.25 * k * k * self.a0 * self.a0;
                self.coupling * k * k / (PI * 3f64.sqrt() * s * s)
            }
            FormFactorFamily::HydrogenDipole => {
                let s = 1.0 + 4.0 * k * k * self.a0 * self.a0 / 9.0;
                self.coupling * k * k / (PI * 3f64.sqrt() * s * s * s)
            }
            FormFactorFamily::Tabulated => self.table.as_ref().map_or(0.0, |t| t.eval(k)),
        }
    }

    #[inline]
    pub fn g2(&self, k: f64) -> f64 {
        let g = self.g(k);
        g * g
    }

    /// Limit of g(k)/k² at k → 0.
    pub fn small_k_coefficient(&self) -> f64 {
        self.coupling / (PI * 3f64.sqrt())
    }

    /// Natural wavenumber scale of the formfactor.
    pub fn scale(&self) -> f64 {
        match self.family {
            FormFactorFamily::Tabulated => self.table.as_ref().map_or(1.0, |t| t.k[t.k.len() - 1]),
            _ => 1.0 / self.a0,
        }
    }

    /// Points where g is not smooth (table knots).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.table.as_ref().map_or_else(Vec::new, |t| t.k.clone())
    }

    /// Upper end of the support, if finite.
    pub fn support_end(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.k[t.k.len() - 1])
    }

    pub fn with_coupling(&self, coupling: f64) -> FormFactor {
        let mut ff = self.clone();
        if let Some(t) = &self.table {
            let ratio = if self.coupling != 0.0 { coupling / self.coupling } else { 0.0 };
            let g = t.g.iter().map(|v| v * ratio.abs()).collect();
            ff.table = Some(Arc::new(Table::new(t.k.clone(), g).expect("rescaled table stays valid")));
        }
        ff.coupling = coupling;
        ff
    }
}

/// g(k) with the k ≥ 0 domain check.
pub fn formfactor_eval(ff: &FormFactor, k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::Domain(format!("formfactor needs k >= 0, got {k}")));
    }
    Ok(ff.g(k))
}

fn check_a0(a0: f64) -> Result<()> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidParameter(format!("a0 must be positive and finite, got {a0}")));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

/// Level energies handed to [`make_model`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Masses {
    /// m_e = m, m_g = −m.
    Symmetric(f64),
    Levels { m_e: f64, m_g: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub variant: Variant,
    pub m_e: f64,
    pub m_g: f64,
    pub formfactor: FormFactor,
    pub dipole_response_constant_a: f64,
}

impl SystemModel {
    /// Half the level splitting; equals m for the symmetric variants.
    pub fn m(&self) -> f64 {
        0.5 * (self.m_e - self.m_g)
    }

    /// Level splitting m_e − m_g.
    pub fn delta_m(&self) -> f64 {
        self.m_e - self.m_g
    }

    pub fn dim_e(&self) -> u32 {
        self.variant.dim_e()
    }

    pub fn with_formfactor(&self, formfactor: FormFactor) -> SystemModel {
        SystemModel { formfactor, ..self.clone() }
    }
}

/// Validated constructor. `a` defaults to d²/3.
pub fn make_model(variant: Variant, masses: Masses, formfactor: FormFactor, a: Option<f64>) -> Result<SystemModel> {
    check_a0(formfactor.a0)?;
    let (m_e, m_g) = match (variant, masses) {
        (Variant::Spin | Variant::TwoLevelAtom, Masses::Symmetric(m)) => (m, -m),
        (Variant::Spin | Variant::TwoLevelAtom, Masses::Levels { m_e, m_g }) => {
            if m_e != -m_g {
                return Err(Error::InvalidParameter(format!(
                    "{variant} variant needs m_g = -m_e, got m_e = {m_e}, m_g = {m_g}"
                )));
            }
            (m_e, m_g)
        }
        (Variant::DipoleAtom, Masses::Symmetric(m)) => (m, -m),
        (Variant::DipoleAtom, Masses::Levels { m_e, m_g }) => (m_e, m_g),
    };
    check_finite("m_e", m_e)?;
    check_finite("m_g", m_g)?;
    match variant {
        Variant::Spin | Variant::TwoLevelAtom if m_e <= 0.0 => {
            return Err(Error::InvalidParameter(format!("m must be positive, got {m_e}")));
        }
        Variant::DipoleAtom if m_e <= m_g => return Err(Error::DegenerateLevels { m_e, m_g }),
        _ => {}
    }
    let a = a.unwrap_or(formfactor.coupling * formfactor.coupling / 3.0);
    check_finite("A", a)?;
    Ok(SystemModel { variant, m_e, m_g, formfactor, dipole_response_constant_a: a })
}

/// Parses a flat `key = value` configuration. Lines starting with `#` are
/// comments. Relative table paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<SystemModel> {
    let mut variant = None;
    let (mut m, mut m_e, mut m_g) = (None, None, None);
    let (mut mu, mut d, mut a0, mut a, mut e) = (None, None, None, None, None);
    let (mut family, mut table_path) = (None, None::<PathBuf>);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("line {}: '{value}' is not a number for {key}", lineno + 1)))
        };
        match key {
            "variant" => variant = Some(Variant::parse(value)?),
            "m" => m = Some(num()?),
            "m_e" => m_e = Some(num()?),
            "m_g" => m_g = Some(num()?),
            "mu" => mu = Some(num()?),
            "d" => d = Some(num()?),
            "e" => e = Some(num()?),
            "a0" => a0 = Some(num()?),
            "A" => a = Some(num()?),
            "formfactor.family" => family = Some(FormFactorFamily::parse(value)?),
            "formfactor.table_path" => {
                let p = PathBuf::from(value);
                table_path = Some(match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                });
            }
            other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
        }
    }
    let variant = variant.ok_or_else(|| Error::Config("missing key 'variant'".into()))?;
    let masses = match (m, m_e, m_g) {
        (Some(m), None, None) => Masses::Symmetric(m),
        (None, Some(m_e), Some(m_g)) => Masses::Levels { m_e, m_g },
        (None, Some(m_e), None) if variant != Variant::DipoleAtom => Masses::Symmetric(m_e),
        _ => return Err(Error::Config("give either m, or both m_e and m_g".into())),
    };
    let a0 = a0.unwrap_or(1.0);
    let family = family.unwrap_or(match variant {
        Variant::Spin => FormFactorFamily::HydrogenSpin,
        _ => FormFactorFamily::HydrogenDipole,
    });
    let ff = match family {
        FormFactorFamily::HydrogenSpin => FormFactor::hydrogen_spin(mu.unwrap_or(1.0), a0)?,
        FormFactorFamily::HydrogenDipole => match d {
            Some(d) => FormFactor::hydrogen_dipole(d, a0)?,
            None => FormFactor::hydrogen_dipole_from_charge(e.unwrap_or(1.0), a0)?,
        },
        FormFactorFamily::Tabulated => {
            let path = table_path.ok_or_else(|| Error::Config("tabulated formfactor needs formfactor.table_path".into()))?;
            FormFactor::tabulated_from_csv(&path)?
        }
    };
    make_model(variant, masses, ff, a)
}

/// Reads and parses a configuration file.
pub fn load_model(path: &Path) -> Result<SystemModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, path.parent())
}
