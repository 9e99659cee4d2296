//! Command-line front end: frequency scans, pole reports, the verification
//! suite and a self-energy dump.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::QuadratureSpec;
use crate::error::{Error, Result};
use crate::model::{load_model, SystemModel};
use crate::response::{evaluate, locate_poles, Order, Quantity};
use crate::selfenergy::{coefficients_b_delta, electron_self_energy_2, mass_correction, photon_self_energy_2, photon_self_energy_24, Channel};
use crate::verify;

/// Schema line written at the top of every CSV file.
pub const CSV_SCHEMA: &str = "# qubit-qed v1";

const CSV_HEADER: [&str; 6] = ["omega", "channel", "re", "im", "order", "quantity"];

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "QUBIT_QED_THREADS";

#[derive(Parser, Debug)]
#[command(name = "qubit-qed", version, about = "Response functions of two-level systems coupled to a quantized field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a response quantity on a uniform frequency grid.
    Scan(ScanArgs),
    /// Locate the resonance poles of the response.
    Poles {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "4")]
        order: String,
    },
    /// Run the verification suite.
    Verify {
        /// Model used by the model-dependent checks instead of the built-in ones.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated check names or numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print mass corrections, coefficients and self-energies for a model.
    Selfenergy {
        #[arg(long)]
        config: PathBuf,
        /// Electron energy for Σ (defaults to m_e).
        #[arg(long, allow_hyphen_values = true)]
        p0: Option<f64>,
        /// Photon energy for P (defaults to half the level splitting).
        #[arg(long, allow_hyphen_values = true)]
        k0: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub quantity: String,
    #[arg(long, default_value = "2")]
    pub order: String,
    #[arg(long, allow_hyphen_values = true)]
    pub omega_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub omega_max: f64,
    #[arg(long)]
    pub points: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// A validated scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRequest {
    pub quantity: Quantity,
    pub order: Order,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub format: Format,
}

impl ScanRequest {
    pub fn new(quantity: Quantity, order: Order, omega_min: f64, omega_max: f64, points: usize, format: Format) -> Result<ScanRequest> {
        if points < 2 {
            return Err(Error::InvalidParameter(format!("points must be >= 2, got {points}")));
        }
        if !(omega_min < omega_max) || !omega_min.is_finite() || !omega_max.is_finite() {
            return Err(Error::InvalidParameter(format!("need finite omega_min < omega_max, got [{omega_min}, {omega_max}]")));
        }
        if quantity == Quantity::Scattering && !(omega_min > 0.0) {
            return Err(Error::NonPositiveFrequency(omega_min));
        }
        Ok(ScanRequest { quantity, order, omega_min, omega_max, points, format })
    }

    /// Grid points; a grid symmetric about 0 is exactly antisymmetric.
    pub fn grid(&self) -> Vec<f64> {
        let n = (self.points - 1) as f64;
        (0..self.points).map(|i| (self.omega_min * (n - i as f64) + self.omega_max * i as f64) / n).collect()
    }
}

/// One emitted row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub omega: f64,
    pub channel: Channel,
    pub re: f64,
    pub im: f64,
    #[serde(with = "order_label")]
    pub order: Order,
    #[serde(with = "quantity_label")]
    pub quantity: Quantity,
}

mod order_label {
    use super::Order;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(o: &Order, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(o.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Order, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod quantity_label {
    use super::Quantity;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Quantity, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(q.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Quantity, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Evaluates a scan; rows are omega-major, channel-minor regardless of the
/// order in which workers finish.
pub fn scan_rows(model: &SystemModel, req: &ScanRequest, quad: &QuadratureSpec) -> Result<Vec<ScanRow>> {
    let grid = req.grid();
    let pool = thread_pool()?;
    let values: Vec<Result<_>> = pool.install(|| grid.par_iter().map(|&w| evaluate(model, req.quantity, req.order, w, quad)).collect());
    let mut rows = Vec::with_capacity(grid.len() * 3);
    for (&omega, value) in grid.iter().zip(values) {
        for (channel, v) in value?.entries() {
            rows.push(ScanRow { omega, channel, re: v.re, im: v.im, order: req.order, quantity: req.quantity });
        }
    }
    Ok(rows)
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "{CSV_SCHEMA}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([fmt_float(r.omega), r.channel.name().to_string(), fmt_float(r.re), fmt_float(r.im), r.order.label().to_string(), r.quantity.label().to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonScan {
    schema: String,
    rows: Vec<ScanRow>,
}

pub fn write_json<W: Write>(rows: &[ScanRow], mut out: W) -> Result<()> {
    let doc = JsonScan { schema: CSV_SCHEMA.trim_start_matches("# ").to_string(), rows: rows.to_vec() };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Io(io::Error::other(e)))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads rows written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize().map(|row| row.map_err(|e| Error::Config(format!("malformed scan row: {e}")))).collect()
}

/// Reads rows written by [`write_json`].
pub fn read_json<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    let doc: JsonScan = serde_json::from_reader(input).map_err(|e| Error::Config(format!("malformed scan file: {e}")))?;
    Ok(doc.rows)
}

/// Evaluates a scan and writes it in the requested format.
pub fn write_scan<W: Write>(model: &SystemModel, req: &ScanRequest, quad: &QuadratureSpec, out: W) -> Result<()> {
    let rows = scan_rows(model, req, quad)?;
    match req.format {
        Format::Csv => write_csv(&rows, out),
        Format::Json => write_json(&rows, out),
    }
}

fn run_scan(args: &ScanArgs) -> Result<()> {
    let model = load_model(&args.config)?;
    let req = ScanRequest::new(args.quantity.parse()?, args.order.parse()?, args.omega_min, args.omega_max, args.points, args.format)?;
    let quad = QuadratureSpec::default();
    match &args.output {
        Some(path) => {
            let mut buf = Vec::new();
            write_scan(&model, &req, &quad, &mut buf)?;
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(&buf)?;
            f.flush()?;
        }
        None => write_scan(&model, &req, &quad, io::stdout().lock())?,
    }
    Ok(())
}

fn run_poles(config: &PathBuf, order: &str) -> Result<()> {
    let model = load_model(config)?;
    let poles = locate_poles(&model, order.parse()?, &QuadratureSpec::default())?;
    let mut out = io::stdout().lock();
    for p in poles {
        writeln!(out, "{}, {}, {}", p.channel.name(), fmt_float(p.location.re), fmt_float(p.location.im))?;
    }
    Ok(())
}

fn run_selfenergy(config: &PathBuf, p0: Option<f64>, k0: Option<f64>) -> Result<()> {
    let model = load_model(config)?;
    let quad = QuadratureSpec::default();
    let masses = mass_correction(&model, &quad)?;
    let co = coefficients_b_delta(&model, &quad)?;
    let p0 = p0.unwrap_or(model.m_e);
    let k0 = k0.unwrap_or(0.5 * model.delta_m());
    let sigma = electron_self_energy_2(&model, Complex64::new(p0, 0.0), &masses, &quad)?;
    let p2 = photon_self_energy_2(&model, Complex64::new(k0, 0.0))?;
    let p24 = photon_self_energy_24(&model, k0, &quad)?;
    let mut out = io::stdout().lock();
    let cplx = |v: Complex64| format!("{} {}", fmt_float(v.re), fmt_float(v.im));
    writeln!(out, "variant = {}", model.variant)?;
    writeln!(out, "m_e = {}", fmt_float(model.m_e))?;
    writeln!(out, "m_g = {}", fmt_float(model.m_g))?;
    writeln!(out, "delta_m_e = {}", fmt_float(masses.delta_m_e))?;
    writeln!(out, "delta_m_g = {}", fmt_float(masses.delta_m_g))?;
    writeln!(out, "m_t = {}", fmt_float(masses.m_t))?;
    writeln!(out, "b = {}", fmt_float(co.b))?;
    writeln!(out, "delta = {}", fmt_float(co.delta))?;
    writeln!(out, "p0 = {}", fmt_float(p0))?;
    writeln!(out, "sigma_e = {}", cplx(sigma.c_e))?;
    writeln!(out, "sigma_g = {}", cplx(sigma.c_g))?;
    writeln!(out, "k0 = {}", fmt_float(k0))?;
    for (ch, v) in p2.entries() {
        writeln!(out, "P2_{} = {}", ch.name(), cplx(v))?;
    }
    for (ch, v) in p24.entries() {
        writeln!(out, "P24_{} = {}", ch.name(), cplx(v))?;
    }
    Ok(())
}

fn run_verify(config: Option<&PathBuf>, only: &[String], json: bool) -> Result<bool> {
    let model = config.map(|c| load_model(c)).transpose()?;
    let ids = verify::select(only)?;
    let options = verify::VerifyOptions { model };
    let report = verify::run_selected(&ids, &options, &QuadratureSpec::default())?;
    let mut out = io::stdout().lock();
    if json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        write!(out, "{}", report.to_text())?;
    }
    Ok(report.all_passed())
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Scan(a) => run_scan(a).map(|_| true),
        Command::Poles { config, order } => run_poles(config, order).map(|_| true),
        Command::Verify { config, only, json } => run_verify(config.as_ref(), only, *json),
        Command::Selfenergy { config, p0, k0 } => run_selfenergy(config, *p0, *k0).map(|_| true),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_grid_is_antisymmetric() {
        let req = ScanRequest::new(Quantity::Susceptibility, Order::Second, -3.7, 3.7, 24, Format::Csv).unwrap();
        let g = req.grid();
        for i in 0..g.len() {
            assert_eq!(g[i], -g[g.len() - 1 - i]);
        }
        assert_eq!(g[0], -3.7);
        assert_eq!(g[23], 3.7);
    }

    #[test]
    fn request_validation() {
        assert!(matches!(ScanRequest::new(Quantity::Transition, Order::Second, 1.0, 1.0, 5, Format::Csv), Err(Error::InvalidParameter(_))));
        assert!(matches!(ScanRequest::new(Quantity::Transition, Order::Second, 0.0, 1.0, 1, Format::Csv), Err(Error::InvalidParameter(_))));
        let e = ScanRequest::new(Quantity::Scattering, Order::Second, 0.0, 1.0, 5, Format::Csv).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ScanRow { omega: -0.1, channel: Channel::Plus, re: 1.0 / 3.0, im: -0.0, order: Order::SecondPlusFourth, quantity: Quantity::Susceptibility },
            ScanRow { omega: 2.5e-300, channel: Channel::Scalar, re: f64::MAX, im: 1e-17, order: Order::Second, quantity: Quantity::Polarizability },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# qubit-qed v1\nomega,channel,re,im,order,quantity\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        let mut js = Vec::new();
        write_json(&rows, &mut js).unwrap();
        assert_eq!(read_json(js.as_slice()).unwrap(), rows);
    }
}
