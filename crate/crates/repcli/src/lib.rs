//! Job runner behind the `modrep2` binary: every subcommand produces a
//! [`Report`] holding its result plus a list of checked records, rendered as
//! JSON, CSV or plain text.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::anyhow;
use modrep2_core::charm::{inner, is_irreducible, KAnalyzer, Side};
use modrep2_core::dixon;
use modrep2_core::glam::{group_order, i_lambda, Glam, Lambda};
use modrep2_core::group::{FiniteGroup, Group};
use modrep2_core::irrbuild::{
    classify_primitive, cuspidal_nonrect_count, zeta_closed_form, Assembly, Builder, FamilyLabel, FamilySummary,
    ZetaPolynomial,
};
use modrep2_core::orbit::{class_count_formula, orbit_table, orbit_table_formula, orbits_on_k, orbits_on_k_formula};
use modrep2_core::tring::{make_ring, Backend};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "1";
pub const DEFAULT_CAP: u64 = 500_000;
/// Largest group handed to the class-algebra oracle by default.
pub const DIXON_CAP: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Order,
    Classes,
    Orbits,
    Zeta,
    Construct,
    Dixon,
    VerifyAll,
    RingCompare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Order => "order",
            Command::Classes => "classes",
            Command::Orbits => "orbits",
            Command::Zeta => "zeta",
            Command::Construct => "construct",
            Command::Dixon => "dixon",
            Command::VerifyAll => "verify-all",
            Command::RingCompare => "ring-compare",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Pretty,
}

#[derive(Clone, Debug)]
pub struct JobSpec {
    pub command: Command,
    pub backend: Backend,
    pub q: u32,
    pub lambda: Lambda,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub cap: u64,
    pub threads: Option<usize>,
}

impl JobSpec {
    pub fn new(command: Command, backend: Backend, q: u32, lambda: Lambda) -> JobSpec {
        JobSpec { command, backend, q, lambda, out: None, format: Format::Json, cap: DEFAULT_CAP, threads: None }
    }

    /// Rejects jobs that cannot run: bad ring parameters or a group above the cap.
    pub fn validate(&self) -> Result<(), JobError> {
        make_ring(self.backend, self.q, self.lambda.l1.max(1)).map_err(|e| JobError::Usage(e.to_string()))?;
        if self.command == Command::RingCompare {
            make_ring(Backend::Padic, self.q, 1)
                .map_err(|_| JobError::Usage(format!("ring-compare needs a prime q, got {}", self.q)))?;
        }
        let order = group_order(self.q as u64, self.lambda);
        if order > self.cap {
            return Err(JobError::Usage(format!(
                "|G({})| = {order} exceeds the size cap {} (raise it with --cap)",
                self.lambda, self.cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JobError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

/// One verified statement: an expected value from a closed form or another
/// module, and what was computed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub anchor: String,
    pub expected: Value,
    pub computed: Value,
    pub pass: bool,
}

impl Check {
    pub fn eq(name: impl Into<String>, anchor: impl Into<String>, expected: impl Serialize, computed: impl Serialize) -> Check {
        let expected = serde_json::to_value(expected).unwrap_or(Value::Null);
        let computed = serde_json::to_value(computed).unwrap_or(Value::Null);
        let pass = expected == computed;
        Check { name: name.into(), anchor: anchor.into(), expected, computed, pass }
    }

    pub fn holds(name: impl Into<String>, anchor: impl Into<String>, ok: bool) -> Check {
        Check::eq(name, anchor, true, ok)
    }

    /// A computation that errored out, recorded as a failed check.
    pub fn error(name: impl Into<String>, anchor: impl Into<String>, err: impl std::fmt::Display) -> Check {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            expected: json!("success"),
            computed: json!(format!("error: {err}")),
            pass: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub backend: String,
    pub q: u32,
    pub lambda: String,
    #[serde(flatten)]
    pub result: Map<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    fn new(job: &JobSpec) -> Report {
        Report {
            schema: SCHEMA,
            command: job.command.name().to_string(),
            backend: job.backend.to_string(),
            q: job.q,
            lambda: job.lambda.to_string(),
            result: Map::new(),
            checks: Vec::new(),
            pass: true,
        }
    }

    fn set(&mut self, key: &str, v: impl Serialize) {
        self.result.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn finish(mut self) -> Report {
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn zeta_json(z: &ZetaPolynomial) -> Value {
    serde_json::to_value(z).unwrap_or(Value::Null)
}

/// Runs `job` on a thread pool of the requested size.
pub fn run(job: &JobSpec) -> Result<Report, JobError> {
    job.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = job.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| JobError::Other(anyhow!(e)))?;
    pool.install(|| run_inner(job))
}

fn run_inner(job: &JobSpec) -> Result<Report, JobError> {
    let (b, q, l) = (job.backend, job.q, job.lambda);
    let qq = q as u64;
    let mut r = Report::new(job);
    match job.command {
        Command::Order => {
            let g = Glam::new(b, q, l).map_err(|e| JobError::Usage(e.to_string()))?;
            r.set("order", g.order());
            r.checks.push(Check::eq("group order", "order of the automorphism group", group_order(qq, l), g.order()));
        }
        Command::Classes => {
            let g = Glam::new(b, q, l).map_err(|e| JobError::Usage(e.to_string()))?;
            let k = g.classes().len();
            r.set("classes", k);
            r.checks.push(Check::eq("class count", "conjugacy class count formula", class_count_formula(qq, l), k));
        }
        Command::Orbits => {
            let g = Glam::new(b, q, l).map_err(|e| JobError::Usage(e.to_string()))?;
            if l.l2 < 2 {
                return Err(JobError::Usage(format!("orbit tables need l2 >= 2, got {l}")));
            }
            r.checks.extend(orbit_checks(&g));
            if let Ok(rows) = orbit_table(&g) {
                r.set("orbit_table", rows);
            }
            if let Ok(n) = orbits_on_k(&g) {
                r.set("orbits_on_k", n);
            }
        }
        Command::Zeta => {
            let builder = Builder::new(b, q, l.l1).map_err(|e| JobError::Usage(e.to_string()))?;
            match builder.assemble(l) {
                Ok(a) => {
                    r.set("zeta", zeta_json(&a.zeta));
                    r.checks.push(Check::eq("zeta vs closed form", "zeta polynomial closed form", zeta_json(&zeta_closed_form(l, qq)), zeta_json(&a.zeta)));
                }
                Err(e) => r.checks.push(Check::error("zeta", "zeta polynomial closed form", e)),
            }
        }
        Command::Construct => {
            let builder = Builder::new(b, q, l.l1).map_err(|e| JobError::Usage(e.to_string()))?;
            match builder.assemble(l) {
                Ok(a) => {
                    let fams: Vec<FamilySummary> = a.families.iter().map(FamilySummary::from).collect();
                    r.set("families", fams);
                    r.set("zeta", zeta_json(&a.zeta));
                    let chars: Vec<Value> = a
                        .families
                        .iter()
                        .flat_map(|f| f.members.iter().map(move |c| json!({"family": f.label.to_string(), "character": c})))
                        .collect();
                    r.set("characters", chars);
                    r.checks.extend(assembly_checks(&a));
                }
                Err(e) => r.checks.push(Check::error("construction", "family constructions", e)),
            }
        }
        Command::Dixon => {
            let g = Glam::new(b, q, l).map_err(|e| JobError::Usage(e.to_string()))?;
            match dixon::irr_degrees(&g) {
                Ok(d) => {
                    r.set("degrees", zeta_json(&d));
                    r.checks.push(Check::eq("degree count is the class count", "column orthogonality", g.classes().len() as u64, d.count()));
                    r.checks.push(Check::eq("sum of squared degrees", "regular representation", g.order() as u64, d.sum_squares()));
                }
                Err(e) => r.checks.push(Check::error("class-algebra oracle", "class algebra splitting", e)),
            }
        }
        Command::VerifyAll => {
            let (checks, n) = verify_all(b, q, l);
            r.checks = checks;
            r.set("irreducibles", n);
        }
        Command::RingCompare => {
            r.checks = ring_compare(q, l);
            r.backend = "padic+tpoly".into();
        }
    }
    Ok(r.finish())
}

fn orbit_checks(g: &Glam) -> Vec<Check> {
    let (q, l) = (g.q() as u64, g.lambda);
    let mut out = Vec::new();
    match orbit_table(g) {
        Ok(rows) => {
            let want = orbit_table_formula(q, l);
            out.push(Check::eq("orbit table on K", "orbit tables for the dual of K", want, rows));
        }
        Err(e) => out.push(Check::error("orbit table on K", "orbit tables for the dual of K", e)),
    }
    match orbits_on_k(g) {
        Ok(n) => out.push(Check::eq("orbits on K", "orbit count of G on K", orbits_on_k_formula(q, l), n)),
        Err(e) => out.push(Check::error("orbits on K", "orbit count of G on K", e)),
    }
    out
}

fn assembly_checks(a: &Assembly) -> Vec<Check> {
    a.checks
        .iter()
        .map(|(name, ok)| Check::holds(format!("assembly: {name}"), "complete set of irreducibles", *ok))
        .collect()
}

/// The full battery for one `(backend, q, lambda)`. Returns the checks and the
/// number of irreducibles accounted for.
pub fn verify_all(backend: Backend, q: u32, l: Lambda) -> (Vec<Check>, u64) {
    let qq = q as u64;
    let mut out = Vec::new();
    let builder = match Builder::new(backend, q, l.l1) {
        Ok(b) => b,
        Err(e) => return (vec![Check::error("setup", "ring tower", e)], 0),
    };
    let g = match builder.group(l) {
        Ok(g) => g,
        Err(e) => return (vec![Check::error("setup", "group enumeration", e)], 0),
    };
    out.push(Check::eq("group order", "order of the automorphism group", group_order(qq, l), g.order()));
    let k = g.classes().len() as u64;
    out.push(Check::eq("class count", "conjugacy class count formula", class_count_formula(qq, l), k));
    if l.l2 >= 2 {
        out.extend(orbit_checks(&g));
    }
    let closed = zeta_closed_form(l, qq);
    let mut count = 0;
    match builder.assemble(l) {
        Ok(a) => {
            count = a.zeta.count();
            out.push(Check::eq("zeta: construction vs closed form", "zeta polynomial closed form", zeta_json(&closed), zeta_json(&a.zeta)));
            out.push(Check::eq("R(1) is the class count", "number of irreducibles", k, a.zeta.count()));
            out.push(Check::eq("sum of squared degrees", "regular representation", g.order() as u64, a.zeta.sum_squares()));
            out.extend(assembly_checks(&a));
            if l.l2 >= 2 {
                out.extend(functor_checks(&builder, l, &a));
            }
        }
        Err(e) => out.push(Check::error("zeta: construction", "family constructions", e)),
    }
    if g.order() as u64 <= DIXON_CAP {
        match dixon::irr_degrees(&*g) {
            Ok(d) => out.push(Check::eq("zeta: oracle vs closed form", "class algebra oracle", zeta_json(&closed), zeta_json(&d))),
            Err(e) => out.push(Check::error("zeta: oracle", "class algebra oracle", e)),
        }
    }
    (out, count)
}

fn functor_checks(b: &Builder, l: Lambda, a: &Assembly) -> Vec<Check> {
    let mut out = Vec::new();
    let res = (|| -> anyhow::Result<()> {
        let g = b.group(l)?;
        let fun = b.functors(l)?;
        let q = b.q() as u64;
        if !l.is_rectangular() {
            let (count, degree) = cuspidal_nonrect_count(l, q);
            let c = b.cuspidals(l)?;
            out.push(Check::eq(
                "cuspidals: count and degree",
                "cuspidal construction from eta characters",
                json!({"count": count, "degree": degree}),
                json!({"count": c.members.len(), "degree": c.members.first().map(|x| x.degree_u64())}),
            ));
        }
        let mut ri = true;
        let mut inj = true;
        for mu in i_lambda(l) {
            let cusp = b.cuspidals(mu)?;
            for side in [Side::Embed, Side::Quot] {
                let ind: Vec<_> = cusp.members.iter().map(|c| fun.inf_ind(mu, side, c)).collect::<Result<_, _>>()?;
                for (i, (x, s)) in ind.iter().zip(&cusp.members).enumerate() {
                    ri &= is_irreducible(&*g, x)? && fun.inf_res(mu, side, x)?.approx_eq(s);
                    for y in &ind[i + 1..] {
                        inj &= inner(&*g, x, y)? == 0;
                    }
                }
            }
        }
        out.push(Check::holds("infinitesimal induction of cuspidals: irreducible, r after i is the identity", "infinitesimal induction theorem", ri));
        out.push(Check::holds("infinitesimal induction of cuspidals: injective", "infinitesimal induction theorem", inj));
        let mut c_hat = true;
        let mut dual = true;
        for (theta, xi, in_c) in b.geometric_inductions(l)? {
            c_hat &= is_irreducible(&*g, &xi)? == in_c;
            if in_c {
                dual &= xi.approx_eq(&fun.geo_ind(&theta, false)?);
            }
        }
        out.push(Check::holds("geometric induction irreducible exactly on C-hat", "geometric induction theorem", c_hat));
        out.push(Check::holds("xi_theta equals its lower-parabolic twin", "geometric induction theorem", dual));
        let ka = KAnalyzer::new(g.clone())?;
        let mut props = true;
        for f in &a.families {
            for chi in &f.members {
                if !ka.is_primitive(chi)? {
                    props &= f.label == FamilyLabel::PullbackTwist;
                    continue;
                }
                let kind = classify_primitive(b, l, chi)?;
                props &= match f.label {
                    FamilyLabel::CuspidalNonrect => kind.cuspidal && kind.inf_sources == 0 && !kind.geometric,
                    FamilyLabel::InfEmbed | FamilyLabel::InfQuot => !kind.cuspidal && kind.inf_sources == 1,
                    FamilyLabel::GeoIrred | FamilyLabel::GeoSplit => kind.geometric && !kind.cuspidal,
                    _ => false,
                };
            }
        }
        out.push(Check::holds("primitive families have their defining properties", "classification of primitive characters", props));
        Ok(())
    })();
    if let Err(e) = res {
        out.push(Check::error("functor checks", "induction functors", e));
    }
    out
}

/// Class counts and degree multisets over `Z/p^l` against `F_p[t]/(t^l)`.
pub fn ring_compare(q: u32, l: Lambda) -> Vec<Check> {
    let mut out = Vec::new();
    let side = |backend: Backend| -> anyhow::Result<(u64, Option<ZetaPolynomial>, Option<ZetaPolynomial>)> {
        let b = Builder::new(backend, q, l.l1)?;
        let g: Arc<Glam> = b.group(l)?;
        let k = g.classes().len() as u64;
        let d = if g.order() as u64 <= DIXON_CAP { Some(dixon::irr_degrees(&*g)?) } else { None };
        let z = b.assemble(l).ok().map(|a| a.zeta.clone());
        Ok((k, d, z))
    };
    match (side(Backend::Padic), side(Backend::Tpoly)) {
        (Ok((kp, dp, zp)), Ok((kt, dt, zt))) => {
            let anchor = "group algebra independent of the ring";
            out.push(Check::eq("class count: padic vs tpoly", anchor, kp, kt));
            if let (Some(dp), Some(dt)) = (&dp, &dt) {
                out.push(Check::eq("oracle degrees: padic vs tpoly", anchor, zeta_json(dp), zeta_json(dt)));
            }
            match (&zp, &zt) {
                (Some(zp), Some(zt)) => out.push(Check::eq("constructed zeta: padic vs tpoly", anchor, zeta_json(zp), zeta_json(zt))),
                _ => out.push(Check::holds("constructed zeta available on both backends", anchor, false)),
            }
        }
        (Err(e), _) | (_, Err(e)) => out.push(Check::error("ring comparison", "group algebra independent of the ring", e)),
    }
    out
}

fn cell(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).unwrap_or_default();
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::new();
            let poly = report.result.get("zeta").or_else(|| report.result.get("degrees"));
            if let Some(Value::Object(m)) = poly {
                s.push_str("dimension,count\n");
                let mut rows: Vec<(u64, &Value)> = m.iter().filter_map(|(k, v)| Some((k.parse().ok()?, v))).collect();
                rows.sort_by_key(|r| r.0);
                for (d, c) in rows {
                    let _ = writeln!(s, "{d},{c}");
                }
            } else {
                s.push_str("name,anchor,expected,computed,pass\n");
                for c in &report.checks {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{}",
                        cell(&json!(c.name)),
                        cell(&json!(c.anchor)),
                        cell(&c.expected),
                        cell(&c.computed),
                        c.pass
                    );
                }
            }
            s
        }
        Format::Pretty => {
            let mut s = String::new();
            let _ = writeln!(s, "{} for G({}) over {} q={}", report.command, report.lambda, report.backend, report.q);
            for (k, v) in &report.result {
                match (k.as_str(), v) {
                    ("zeta" | "degrees", Value::Object(m)) => {
                        let pairs: Vec<(u64, u64)> =
                            m.iter().filter_map(|(d, c)| Some((d.parse().ok()?, c.as_u64()?))).collect();
                        let _ = writeln!(s, "{k}: {}", ZetaPolynomial::from_pairs(&pairs));
                    }
                    ("characters", Value::Array(a)) => {
                        let _ = writeln!(s, "characters: {} (use --format json for values)", a.len());
                    }
                    _ => {
                        let _ = writeln!(s, "{k}: {v}");
                    }
                }
            }
            for c in &report.checks {
                let _ = writeln!(
                    s,
                    "{}  {}  [{}]  expected {}  computed {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.anchor,
                    c.expected,
                    c.computed
                );
            }
            let _ = writeln!(s, "overall: {}", if report.pass { "PASS" } else { "FAIL" });
            s
        }
    }
}
