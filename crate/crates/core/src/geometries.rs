//! Built-in metrics with known answers: model spaces, surfaces of
//! revolution, products and warped products.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{parse_expression, Func, ParseError, ScalarExpr};
use crate::homogeneity::{HomogeneityError, Verdict, VectorFieldExpr};
use crate::tensor::{Interval, MetricChart, TensorError};

/// Fraction of the range cut from each end of singular or periodic axes.
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("profile is not positive at t = {t} (value {value})")]
    NonPositiveProfile { t: f64, value: f64 },
    #[error("warp function depends on fiber coordinate `{coordinate}`")]
    WarpDependsOnFiber { coordinate: String },
    #[error("{kind} model space is not available in dimension {n}")]
    UnsupportedDimension { kind: &'static str, n: usize },
    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),
    #[error("bad parameter `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Homogeneity(#[from] HomogeneityError),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

fn parse(text: &str, coords: &[&str]) -> ScalarExpr {
    parse_expression(text, coords).expect("built-in expression parses")
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// The surface swept by rotating the graph of `f` about the axis:
/// coordinates `(t, θ)` and `g = (1 + f′²) dt² + f² dθ²`.
pub fn surface_of_revolution(profile: &ScalarExpr, t_range: Interval) -> Result<MetricChart> {
    if let Some(v) = profile.variables().into_iter().find(|v| v != "t") {
        return Err(GeometryError::BadParameter { name: "profile".into(), reason: format!("unknown variable `{v}`") });
    }
    let inner = t_range.shrink(DEFAULT_MARGIN);
    const CHECKS: usize = 400;
    for k in 0..=CHECKS {
        let t = inner.lo + inner.width() * k as f64 / CHECKS as f64;
        let value = profile.evaluate(&[("t", t)]).unwrap_or(f64::NAN);
        if !(value > 0.0) {
            return Err(GeometryError::NonPositiveProfile { t, value });
        }
    }
    let df = profile.differentiate("t");
    let upper = vec![ScalarExpr::one().add(&df.powi(2)), ScalarExpr::zero(), profile.powi(2)];
    Ok(MetricChart::new("revolution", strings(&["t", "θ"]), upper, vec![t_range, Interval::new(0.0, TAU)])?
        .with_margin(DEFAULT_MARGIN)
        .with_period(1, TAU))
}

/// Renames `b`'s coordinates that clash with `a`'s by appending `_2`
/// (or `_3`, ..).
fn disjoint_names(a: &[String], b: &[String]) -> HashMap<String, String> {
    let mut taken: Vec<String> = a.iter().chain(b).cloned().collect();
    let mut renames = HashMap::new();
    for name in b {
        if a.contains(name) {
            let fresh = (2..)
                .map(|k| format!("{name}_{k}"))
                .find(|c| !taken.contains(c))
                .expect("unbounded search");
            taken.push(fresh.clone());
            renames.insert(name.clone(), fresh);
        }
    }
    renames
}

/// Block-diagonal `g_a ⊕ (factor · g_b)` on the product chart.
fn block_metric(
    label: String,
    a: &MetricChart,
    a_factor: &ScalarExpr,
    b: &MetricChart,
    renames: &HashMap<String, String>,
) -> Result<MetricChart> {
    let (na, nb) = (a.dim(), b.dim());
    let n = na + nb;
    let coords: Vec<String> = a
        .coords()
        .iter()
        .cloned()
        .chain(b.coords().iter().map(|c| renames.get(c).cloned().unwrap_or_else(|| c.clone())))
        .collect();
    let mut upper = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            upper.push(if j < na {
                a_factor.mul(a.component(i, j))
            } else if i >= na {
                b.component(i - na, j - na).rename(renames)
            } else {
                ScalarExpr::zero()
            });
        }
    }
    let domain = a.domain().iter().chain(b.domain()).copied().collect();
    let mut chart = MetricChart::new(label, coords, upper, domain)?;
    for (axis, (m, p)) in a
        .margins()
        .iter()
        .zip(a.periods())
        .chain(b.margins().iter().zip(b.periods()))
        .enumerate()
    {
        chart = chart.with_axis_margin(axis, *m);
        if let Some(p) = p {
            chart = chart.with_period(axis, *p);
        }
    }
    Ok(chart)
}

/// `g_a ⊕ g_b`; coordinates of `b` that clash with `a`'s are renamed.
pub fn product_metric(a: &MetricChart, b: &MetricChart) -> Result<MetricChart> {
    let renames = disjoint_names(a.coords(), b.coords());
    block_metric(format!("{}×{}", a.label(), b.label()), a, &ScalarExpr::one(), b, &renames)
}

/// `e^φ g_0 ⊕ g_S` with coordinates of the fiber first, then the base.
/// The warp `φ` must only involve base coordinates.
pub fn warped_product(base: &MetricChart, fiber: &MetricChart, warp: &ScalarExpr) -> Result<MetricChart> {
    for v in warp.variables() {
        if base.coord_index(&v).is_some() {
            continue;
        }
        if fiber.coord_index(&v).is_some() {
            return Err(GeometryError::WarpDependsOnFiber { coordinate: v });
        }
        return Err(GeometryError::BadParameter { name: "warp".into(), reason: format!("unknown variable `{v}`") });
    }
    let renames = disjoint_names(fiber.coords(), base.coords());
    let factor = ScalarExpr::call(Func::Exp, &warp.rename(&renames));
    block_metric(format!("{}×_φ{}", fiber.label(), base.label()), fiber, &factor, base, &renames)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Euclidean,
    Sphere,
    Hyperbolic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Euclidean => "euclidean",
            ModelKind::Sphere => "sphere",
            ModelKind::Hyperbolic => "hyperbolic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct KillingField {
    pub label: String,
    pub field: VectorFieldExpr,
}

/// One chart of a catalog geometry together with Killing fields written in
/// its coordinates.
#[derive(Clone, Debug)]
pub struct CatalogChart {
    pub chart: Arc<MetricChart>,
    pub killing_fields: Vec<KillingField>,
}

impl CatalogChart {
    fn new(chart: MetricChart, killing: &[(&str, &[&str])]) -> Self {
        let coords = chart.coords().to_vec();
        let killing_fields = killing
            .iter()
            .map(|(label, comps)| KillingField {
                label: label.to_string(),
                field: VectorFieldExpr::parse(comps, &coords).expect("built-in Killing field parses"),
            })
            .collect();
        CatalogChart { chart: Arc::new(chart), killing_fields }
    }
}

#[derive(Clone, Debug)]
pub struct GeometryCatalogEntry {
    pub name: String,
    pub description: String,
    /// primary chart first, then alternates covering the same geometry
    pub charts: Vec<CatalogChart>,
    /// `None` when parameters make the answer unknown in advance
    pub expected_verdict: Option<Verdict>,
}

impl GeometryCatalogEntry {
    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.charts[0].chart
    }

    pub fn killing_fields(&self) -> &[KillingField] {
        &self.charts[0].killing_fields
    }
}

/// Euclidean space, the round sphere of radius `scale` or hyperbolic space
/// of curvature `−1/scale²`, in dimension 2 or 3.
pub fn model_space(kind: ModelKind, n: usize, scale: f64) -> Result<GeometryCatalogEntry> {
    if !(n == 2 || n == 3) {
        return Err(GeometryError::UnsupportedDimension { kind: kind.name(), n });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeometryError::BadParameter { name: "scale".into(), reason: format!("{scale} is not positive") });
    }
    let s2 = ScalarExpr::constant(scale * scale);
    let scaled = |e: ScalarExpr| s2.mul(&e);
    let label = format!("{}{n}", kind.name());
    let charts = match (kind, n) {
        (ModelKind::Euclidean, 2) => {
            let c = MetricChart::new(label.clone(), strings(&["x", "y"]), vec![s2.clone(), ScalarExpr::zero(), s2.clone()], vec![Interval::new(-1.0, 1.0); 2])?;
            vec![CatalogChart::new(c, &[("∂x", &["1", "0"]), ("∂y", &["0", "1"]), ("x∂y − y∂x", &["-y", "x"])])]
        }
        (ModelKind::Euclidean, _) => {
            let z = ScalarExpr::zero();
            let upper = vec![s2.clone(), z.clone(), z.clone(), s2.clone(), z, s2.clone()];
            let c = MetricChart::new(label.clone(), strings(&["x", "y", "z"]), upper, vec![Interval::new(-1.0, 1.0); 3])?;
            vec![CatalogChart::new(
                c,
                &[
                    ("∂x", &["1", "0", "0"]),
                    ("∂y", &["0", "1", "0"]),
                    ("∂z", &["0", "0", "1"]),
                    ("x∂y − y∂x", &["-y", "x", "0"]),
                    ("y∂z − z∂y", &["0", "-z", "y"]),
                ],
            )]
        }
        (ModelKind::Sphere, 2) => {
            let c = &["θ", "φ"];
            let spherical = MetricChart::new(
                label.clone(),
                strings(c),
                vec![s2.clone(), ScalarExpr::zero(), scaled(parse("sin(θ)^2", c))],
                vec![Interval::new(0.0, PI), Interval::new(0.0, TAU)],
            )?
            .with_margin(DEFAULT_MARGIN)
            .with_period(1, TAU);
            let st = &["u", "v"];
            let conformal = scaled(parse("4/(1+u^2+v^2)^2", st));
            let stereo = MetricChart::new(
                format!("{label}-stereographic"),
                strings(st),
                vec![conformal.clone(), ScalarExpr::zero(), conformal],
                vec![Interval::new(-1.5, 1.5); 2],
            )?;
            vec![
                CatalogChart::new(
                    spherical,
                    &[
                        ("∂φ", &["0", "1"]),
                        ("sin φ ∂θ + cot θ cos φ ∂φ", &["sin(φ)", "cos(θ)/sin(θ)*cos(φ)"]),
                        ("cos φ ∂θ − cot θ sin φ ∂φ", &["cos(φ)", "-cos(θ)/sin(θ)*sin(φ)"]),
                    ],
                ),
                CatalogChart::new(
                    stereo,
                    &[
                        ("u∂v − v∂u", &["-v", "u"]),
                        ("rotation X", &["(1+u^2-v^2)/2", "u*v"]),
                        ("rotation Y", &["u*v", "(1-u^2+v^2)/2"]),
                    ],
                ),
            ]
        }
        (ModelKind::Sphere, _) => {
            let c = &["χ", "θ", "φ"];
            let z = ScalarExpr::zero();
            let spherical = MetricChart::new(
                label.clone(),
                strings(c),
                vec![s2.clone(), z.clone(), z.clone(), scaled(parse("sin(χ)^2", c)), z, scaled(parse("sin(χ)^2*sin(θ)^2", c))],
                vec![Interval::new(0.0, PI), Interval::new(0.0, PI), Interval::new(0.0, TAU)],
            )?
            .with_margin(DEFAULT_MARGIN)
            .with_period(2, TAU);
            let st = &["x", "y", "z"];
            let conformal = scaled(parse("4/(1+x^2+y^2+z^2)^2", st));
            let z = ScalarExpr::zero();
            let stereo = MetricChart::new(
                format!("{label}-stereographic"),
                strings(st),
                vec![conformal.clone(), z.clone(), z.clone(), conformal.clone(), z, conformal],
                vec![Interval::new(-1.2, 1.2); 3],
            )?;
            vec![
                CatalogChart::new(
                    spherical,
                    &[("∂φ", &["0", "0", "1"]), ("sin φ ∂θ + cot θ cos φ ∂φ", &["0", "sin(φ)", "cos(θ)/sin(θ)*cos(φ)"])],
                ),
                CatalogChart::new(
                    stereo,
                    &[
                        ("x∂y − y∂x", &["-y", "x", "0"]),
                        ("y∂z − z∂y", &["0", "-z", "y"]),
                        ("rotation X", &["(1+x^2-y^2-z^2)/2", "x*y", "x*z"]),
                    ],
                ),
            ]
        }
        (ModelKind::Hyperbolic, 2) => {
            let c = &["x", "y"];
            let conformal = scaled(parse("1/y^2", c));
            let chart = MetricChart::new(
                label.clone(),
                strings(c),
                vec![conformal.clone(), ScalarExpr::zero(), conformal],
                vec![Interval::new(-1.0, 1.0), Interval::new(0.5, 2.0)],
            )?;
            vec![CatalogChart::new(
                chart,
                &[("∂x", &["1", "0"]), ("x∂x + y∂y", &["x", "y"]), ("(x²−y²)∂x + 2xy∂y", &["x^2-y^2", "2*x*y"])],
            )]
        }
        (ModelKind::Hyperbolic, _) => {
            let c = &["x", "y", "z"];
            let conformal = scaled(parse("1/z^2", c));
            let zero = ScalarExpr::zero();
            let chart = MetricChart::new(
                label.clone(),
                strings(c),
                vec![conformal.clone(), zero.clone(), zero.clone(), conformal.clone(), zero, conformal],
                vec![Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0), Interval::new(0.5, 2.0)],
            )?;
            vec![CatalogChart::new(
                chart,
                &[
                    ("∂x", &["1", "0", "0"]),
                    ("∂y", &["0", "1", "0"]),
                    ("x∂x + y∂y + z∂z", &["x", "y", "z"]),
                    ("x∂y − y∂x", &["-y", "x", "0"]),
                ],
            )]
        }
    };
    let description = match kind {
        ModelKind::Euclidean => format!("flat R^{n}"),
        ModelKind::Sphere => format!("round S^{n} of radius {scale}"),
        ModelKind::Hyperbolic => format!("hyperbolic H^{n}, upper half-space, curvature −1/{scale}²"),
    };
    Ok(GeometryCatalogEntry { name: label, description, charts, expected_verdict: Some(Verdict::LocallyHomogeneous) })
}

/// `x ↦ (sin θ cos φ, sin θ sin φ) / (1 − cos θ)`: spherical to stereographic
/// coordinates on the unit 2-sphere, projecting from `θ = 0`.
pub fn sphere_to_stereographic(theta: f64, phi: f64) -> [f64; 2] {
    let d = 1.0 - theta.cos();
    [theta.sin() * phi.cos() / d, theta.sin() * phi.sin() / d]
}

/// Catalog parameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum Param {
    Number(f64),
    Text(String),
}

pub type Params = BTreeMap<String, Param>;

pub const DEFAULT_PROFILE: &str = "2+sin(3*t)";

/// Catalog names with one-line descriptions.
pub const CATALOG: &[(&str, &str)] = &[
    ("euclidean2", "flat plane"),
    ("euclidean3", "flat 3-space"),
    ("sphere2", "unit 2-sphere, spherical and stereographic charts"),
    ("sphere3", "unit 3-sphere, spherical and stereographic charts"),
    ("hyperbolic2", "hyperbolic half-plane"),
    ("hyperbolic3", "hyperbolic half-space"),
    ("flat_torus", "flat torus with a constant non-diagonal metric"),
    ("sphere_x_sphere", "S²(1) × S²(2)"),
    ("revolution", "surface of revolution of a profile f(t) (param: profile, t_min, t_max)"),
    ("hyperbolic_x_revolution", "hyperbolic plane × surface of revolution (param: profile)"),
    ("warped", "hyperbolic plane warped by e^t over a surface of revolution (params: profile, warp)"),
];

fn number(params: &Params, name: &str, default: f64) -> Result<f64> {
    match params.get(name) {
        None => Ok(default),
        Some(Param::Number(v)) => Ok(*v),
        Some(Param::Text(t)) => {
            t.parse().map_err(|_| GeometryError::BadParameter { name: name.into(), reason: format!("`{t}` is not a number") })
        }
    }
}

fn text(params: &Params, name: &str, default: &str) -> Result<String> {
    match params.get(name) {
        None => Ok(default.to_string()),
        Some(Param::Text(t)) => Ok(t.clone()),
        Some(Param::Number(v)) => Ok(v.to_string()),
    }
}

fn revolution(params: &Params) -> Result<(MetricChart, bool)> {
    let profile = text(params, "profile", DEFAULT_PROFILE)?;
    let lo = number(params, "t_min", -1.0)?;
    let hi = number(params, "t_max", 1.0)?;
    if !(lo < hi) {
        return Err(GeometryError::BadParameter { name: "t_min".into(), reason: "t_min must be below t_max".into() });
    }
    let f = parse_expression(&profile, &["t"])?;
    Ok((surface_of_revolution(&f, Interval::new(lo, hi))?, profile == DEFAULT_PROFILE))
}

fn check_known(params: &Params, known: &[&str]) -> Result<()> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(GeometryError::BadParameter { name: k.clone(), reason: "not a parameter of this geometry".into() }),
        None => Ok(()),
    }
}

/// Looks up a catalog geometry by name.
pub fn catalog_entry(name: &str, params: &Params) -> Result<GeometryCatalogEntry> {
    let model = |kind, n| -> Result<GeometryCatalogEntry> {
        check_known(params, &["scale"])?;
        model_space(kind, n, number(params, "scale", 1.0)?)
    };
    let homogeneous = Some(Verdict::LocallyHomogeneous);
    let not = Some(Verdict::NotLocallyHomogeneous);
    let description = CATALOG.iter().find(|(n, _)| *n == name).map(|(_, d)| d.to_string());
    let entry = |charts: Vec<CatalogChart>, expected| GeometryCatalogEntry {
        name: name.to_string(),
        description: description.clone().unwrap_or_default(),
        charts,
        expected_verdict: expected,
    };
    match name {
        "euclidean2" => model(ModelKind::Euclidean, 2),
        "euclidean3" => model(ModelKind::Euclidean, 3),
        "sphere2" => model(ModelKind::Sphere, 2),
        "sphere3" => model(ModelKind::Sphere, 3),
        "hyperbolic2" => model(ModelKind::Hyperbolic, 2),
        "hyperbolic3" => model(ModelKind::Hyperbolic, 3),
        "flat_torus" => {
            check_known(params, &[])?;
            let c = MetricChart::from_text("flat_torus", &["x", "y"], &["1", "3/10", "2"], vec![Interval::new(0.0, 1.0); 2])?
                .with_period(0, 1.0)
                .with_period(1, 1.0);
            Ok(entry(vec![CatalogChart::new(c, &[("∂x", &["1", "0"]), ("∂y", &["0", "1"])])], homogeneous))
        }
        "sphere_x_sphere" => {
            check_known(params, &[])?;
            let a = model_space(ModelKind::Sphere, 2, 1.0)?;
            let b = model_space(ModelKind::Sphere, 2, 2.0)?;
            let c = product_metric(a.chart(), b.chart())?.with_label("sphere_x_sphere");
            let killing: &[(&str, &[&str])] = &[
                ("∂φ", &["0", "1", "0", "0"]),
                ("∂φ_2", &["0", "0", "0", "1"]),
                ("sin φ ∂θ + cot θ cos φ ∂φ", &["sin(φ)", "cos(θ)/sin(θ)*cos(φ)", "0", "0"]),
                ("sin φ_2 ∂θ_2 + cot θ_2 cos φ_2 ∂φ_2", &["0", "0", "sin(φ_2)", "cos(θ_2)/sin(θ_2)*cos(φ_2)"]),
            ];
            Ok(entry(vec![CatalogChart::new(c, killing)], homogeneous))
        }
        "revolution" => {
            check_known(params, &["profile", "t_min", "t_max"])?;
            let (c, default) = revolution(params)?;
            Ok(entry(vec![CatalogChart::new(c, &[("∂θ", &["0", "1"])])], if default { not } else { None }))
        }
        "hyperbolic_x_revolution" | "warped" => {
            let warped = name == "warped";
            check_known(params, if warped { &["profile", "t_min", "t_max", "warp"] } else { &["profile", "t_min", "t_max"] })?;
            let (surface, default) = revolution(params)?;
            let h = model_space(ModelKind::Hyperbolic, 2, 1.0)?;
            let chart = if warped {
                let warp = parse_expression(&text(params, "warp", "t")?, surface.coords())?;
                warped_product(&surface, h.chart(), &warp)?
            } else {
                product_metric(h.chart(), &surface)?
            };
            let killing: &[(&str, &[&str])] = &[
                ("∂x", &["1", "0", "0", "0"]),
                ("x∂x + y∂y", &["x", "y", "0", "0"]),
                ("(x²−y²)∂x + 2xy∂y", &["x^2-y^2", "2*x*y", "0", "0"]),
                ("∂θ", &["0", "0", "0", "1"]),
            ];
            Ok(entry(vec![CatalogChart::new(chart.with_label(name), killing)], if default { not } else { None }))
        }
        _ => Err(GeometryError::UnknownGeometry(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revolution_rejects_bad_profiles() {
        let f = parse_expression("-1", &["t"]).unwrap();
        assert!(matches!(
            surface_of_revolution(&f, Interval::new(-1.0, 1.0)),
            Err(GeometryError::NonPositiveProfile { .. })
        ));
        let f = parse_expression("t", &["t"]).unwrap();
        assert!(matches!(
            surface_of_revolution(&f, Interval::new(-1.0, 1.0)),
            Err(GeometryError::NonPositiveProfile { .. })
        ));
    }

    #[test]
    fn product_renames_clashes() {
        let e = model_space(ModelKind::Euclidean, 2, 1.0).unwrap();
        let p = product_metric(e.chart(), e.chart()).unwrap();
        assert_eq!(p.coords(), &["x", "y", "x_2", "y_2"]);
        assert!(p.component(0, 2).is_zero());
        assert!(p.component(3, 3).is_one());
    }

    #[test]
    fn zero_warp_is_the_product() {
        let s = surface_of_revolution(&parse_expression("2+sin(3*t)", &["t"]).unwrap(), Interval::new(-1.0, 1.0)).unwrap();
        let h = model_space(ModelKind::Hyperbolic, 2, 1.0).unwrap();
        let w = warped_product(&s, h.chart(), &ScalarExpr::zero()).unwrap();
        let p = product_metric(h.chart(), &s).unwrap();
        assert_eq!(w.upper_components(), p.upper_components());
        assert_eq!(w.coords(), p.coords());
        let bad = warped_product(&s, h.chart(), &ScalarExpr::var("x"));
        assert!(matches!(bad, Err(GeometryError::WarpDependsOnFiber { .. })));
    }

    #[test]
    fn model_dimensions() {
        assert!(matches!(
            model_space(ModelKind::Sphere, 4, 1.0),
            Err(GeometryError::UnsupportedDimension { .. })
        ));
        for (name, _) in CATALOG {
            assert!(catalog_entry(name, &Params::new()).is_ok(), "{name}");
        }
        assert!(catalog_entry("nope", &Params::new()).is_err());
    }
}
