use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::ModelError;

/// How a lattice window treats coordinates that fall outside `[-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Coordinates wrap around a torus of side `2R + 1`.
    Periodic,
    /// Plain integer coordinates. The window is only a finite sample of `Z^d`;
    /// walkers started in it roam freely.
    Unbounded,
}

/// The cube `[-R, R]^d` of the integer lattice with a constant site measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWindow {
    pub dim: usize,
    pub radius: i64,
    pub boundary: Boundary,
    pub site_weight: f64,
}

impl LatticeWindow {
    pub fn new(dim: usize, radius: i64, boundary: Boundary) -> Self {
        Self {
            dim,
            radius,
            boundary,
            site_weight: 1.0,
        }
    }

    pub fn with_site_weight(mut self, weight: f64) -> Self {
        self.site_weight = weight;
        self
    }

    pub fn side(&self) -> i64 {
        2 * self.radius + 1
    }

    pub fn sites(&self) -> usize {
        (self.side() as usize).pow(self.dim as u32)
    }

    /// Row-major site index, last coordinate fastest.
    pub fn site_index(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dim {
            return None;
        }
        let side = self.side();
        let mut idx = 0usize;
        for &c in coords {
            if c < -self.radius || c > self.radius {
                return None;
            }
            idx = idx * side as usize + (c + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn site_coords(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side() as usize;
        let mut coords = vec![0i64; self.dim];
        for c in coords.iter_mut().rev() {
            *c = (idx % side) as i64 - self.radius;
            idx /= side;
        }
        coords
    }

    /// `x - y`, wrapped into `[-R, R]` per axis for periodic windows.
    pub fn displacement(&self, x: &[i64], y: &[i64]) -> Vec<i64> {
        x.iter()
            .zip(y)
            .map(|(a, b)| self.wrap(a - b))
            .collect()
    }

    pub fn wrap(&self, d: i64) -> i64 {
        match self.boundary {
            Boundary::Unbounded => d,
            Boundary::Periodic => {
                let side = self.side();
                let r = d.rem_euclid(side);
                if r > self.radius {
                    r - side
                } else {
                    r
                }
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidSpace("lattice dimension must be >= 1".into()));
        }
        if self.radius < 0 {
            return Err(ModelError::InvalidSpace("lattice radius must be >= 0".into()));
        }
        let side = self.side() as u128;
        let count = side.checked_pow(self.dim as u32);
        if count.is_none_or(|c| c > u32::MAX as u128) {
            return Err(ModelError::InvalidSpace(format!(
                "lattice window (2*{}+1)^{} is too large to enumerate",
                self.radius, self.dim
            )));
        }
        check_weight(0, self.site_weight)
    }
}

/// Finite mark set with its reference measure `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSet {
    pub names: Vec<String>,
    pub nu: Vec<f64>,
}

impl MarkSet {
    pub fn new(names: Vec<String>, nu: Vec<f64>) -> Self {
        Self { names, nu }
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.nu.iter().sum()
    }
}

/// Identifier of one point of a [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Point {
    Named(String),
    Site(Vec<i64>),
    /// Lattice coordinates plus a mark index.
    Marked(Vec<i64>, usize),
}

/// Description accepted by [`build_space`].
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    Finite { names: Vec<String>, weights: Vec<f64> },
    Lattice(LatticeWindow),
    Product(LatticeWindow, MarkSet),
}

impl SpaceSpec {
    /// Finite set with points named `"0"`, `"1"`, ...
    pub fn finite(weights: Vec<f64>) -> Self {
        let names = (0..weights.len()).map(|i| i.to_string()).collect();
        SpaceSpec::Finite { names, weights }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Finite,
    Lattice(LatticeWindow),
    Product(LatticeWindow, MarkSet),
}

/// Enumerated points with their positive measure weights.
///
/// Product spaces are enumerated lattice-outer, marks-inner, so point
/// `site * n_marks + mark` is `(site, mark)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    shape: Shape,
    points: Vec<Point>,
    weights: Vec<f64>,
}

fn check_weight(index: usize, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveWeight { index, value })
    }
}

/// Validate a space description and enumerate its points.
pub fn build_space(spec: SpaceSpec) -> Result<StateSpace, ModelError> {
    match spec {
        SpaceSpec::Finite { names, weights } => {
            if weights.is_empty() {
                return Err(ModelError::EmptySpace);
            }
            if names.len() != weights.len() {
                return Err(ModelError::InvalidSpace(format!(
                    "{} names for {} weights",
                    names.len(),
                    weights.len()
                )));
            }
            for (i, &w) in weights.iter().enumerate() {
                check_weight(i, w)?;
            }
            let mut seen = BTreeSet::new();
            for n in &names {
                if !seen.insert(n.as_str()) {
                    return Err(ModelError::DuplicatePoint(n.clone()));
                }
            }
            Ok(StateSpace {
                shape: Shape::Finite,
                points: names.into_iter().map(Point::Named).collect(),
                weights,
            })
        }
        SpaceSpec::Lattice(window) => {
            window.validate()?;
            let n = window.sites();
            let points = (0..n).map(|i| Point::Site(window.site_coords(i))).collect();
            let weights = vec![window.site_weight; n];
            Ok(StateSpace {
                shape: Shape::Lattice(window),
                points,
                weights,
            })
        }
        SpaceSpec::Product(window, marks) => {
            window.validate()?;
            if marks.is_empty() {
                return Err(ModelError::EmptySpace);
            }
            if marks.names.len() != marks.nu.len() {
                return Err(ModelError::InvalidSpace(format!(
                    "{} mark names for {} mark weights",
                    marks.names.len(),
                    marks.nu.len()
                )));
            }
            for (i, &w) in marks.nu.iter().enumerate() {
                check_weight(i, w)?;
            }
            let mut seen = BTreeSet::new();
            for n in &marks.names {
                if !seen.insert(n.as_str()) {
                    return Err(ModelError::DuplicatePoint(n.clone()));
                }
            }
            let sites = window.sites();
            let k = marks.len();
            let mut points = Vec::with_capacity(sites * k);
            let mut weights = Vec::with_capacity(sites * k);
            for site in 0..sites {
                let coords = window.site_coords(site);
                for (mark, &nu) in marks.nu.iter().enumerate() {
                    points.push(Point::Marked(coords.clone(), mark));
                    weights.push(window.site_weight * nu);
                }
            }
            Ok(StateSpace {
                shape: Shape::Product(window, marks),
                points,
                weights,
            })
        }
    }
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn window(&self) -> Option<&LatticeWindow> {
        match &self.shape {
            Shape::Finite => None,
            Shape::Lattice(w) | Shape::Product(w, _) => Some(w),
        }
    }

    pub fn marks(&self) -> Option<&MarkSet> {
        match &self.shape {
            Shape::Product(_, m) => Some(m),
            _ => None,
        }
    }

    pub fn n_marks(&self) -> usize {
        self.marks().map_or(1, MarkSet::len)
    }

    /// Mark index of point `i` (0 for spaces without marks).
    pub fn mark_of(&self, i: usize) -> usize {
        match &self.shape {
            Shape::Product(_, m) => i % m.len(),
            _ => 0,
        }
    }

    /// Lattice site index of point `i`.
    pub fn site_of(&self, i: usize) -> Option<usize> {
        match &self.shape {
            Shape::Finite => None,
            Shape::Lattice(_) => Some(i),
            Shape::Product(_, m) => Some(i / m.len()),
        }
    }

    pub fn coords(&self, i: usize) -> Option<&[i64]> {
        match &self.points[i] {
            Point::Named(_) => None,
            Point::Site(c) | Point::Marked(c, _) => Some(c),
        }
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        match (&self.shape, p) {
            (Shape::Finite, Point::Named(_)) => self.points.iter().position(|q| q == p),
            (Shape::Lattice(w), Point::Site(c)) => w.site_index(c),
            (Shape::Product(w, m), Point::Marked(c, s)) if *s < m.len() => {
                w.site_index(c).map(|site| site * m.len() + s)
            }
            _ => None,
        }
    }

    /// Human-readable label, e.g. `"(0,1,-1)"` or `"(0,0)/A"`.
    pub fn label(&self, i: usize) -> String {
        let mut out = String::new();
        match &self.points[i] {
            Point::Named(n) => out.push_str(n),
            Point::Site(c) => write_coords(&mut out, c),
            Point::Marked(c, s) => {
                write_coords(&mut out, c);
                out.push('/');
                if let Some(m) = self.marks() {
                    out.push_str(&m.names[*s]);
                }
            }
        }
        out
    }
}

pub(crate) fn write_coords(out: &mut String, c: &[i64]) {
    out.push('(');
    for (k, v) in c.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn finite_counting_measure() {
        let s = build_space(SpaceSpec::finite(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.total_mass(), 3.0);
    }

    #[test]
    fn periodic_cube_has_27_unit_sites() {
        let s = build_space(SpaceSpec::Lattice(LatticeWindow::new(3, 1, Boundary::Periodic))).unwrap();
        assert_eq!(s.len(), 27);
        assert!(s.weights().iter().all(|&w| w == 1.0));
        for i in 0..s.len() {
            assert_eq!(s.index_of(s.point(i)), Some(i));
        }
    }

    #[test]
    fn product_enumerates_marks_inner() {
        let marks = MarkSet::new(names(&["A", "B"]), vec![0.5, 0.5]);
        let s = build_space(SpaceSpec::Product(
            LatticeWindow::new(1, 1, Boundary::Periodic),
            marks,
        ))
        .unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.weights().iter().all(|&w| w == 0.5));
        assert_eq!(s.point(0), &Point::Marked(vec![-1], 0));
        assert_eq!(s.point(1), &Point::Marked(vec![-1], 1));
        assert_eq!(s.point(2), &Point::Marked(vec![0], 0));
        assert_eq!(s.label(3), "(0)/B");
    }

    #[test]
    fn product_weights_sum_over_marks() {
        let marks = MarkSet::new(names(&["a", "b", "c"]), vec![0.2, 0.3, 1.5]);
        let w = LatticeWindow::new(2, 1, Boundary::Unbounded).with_site_weight(0.25);
        let s = build_space(SpaceSpec::Product(w, marks)).unwrap();
        for site in 0..9 {
            let total: f64 = (0..3).map(|m| s.weight(site * 3 + m)).sum();
            assert!((total - 0.25 * 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(
            build_space(SpaceSpec::finite(vec![1.0, 0.0])),
            Err(ModelError::NonPositiveWeight { index: 1, value: 0.0 })
        );
        assert_eq!(build_space(SpaceSpec::finite(vec![])), Err(ModelError::EmptySpace));
        assert_eq!(
            build_space(SpaceSpec::Finite {
                names: names(&["x", "x"]),
                weights: vec![1.0, 1.0]
            }),
            Err(ModelError::DuplicatePoint("x".into()))
        );
        assert!(build_space(SpaceSpec::finite(vec![1.0, f64::INFINITY])).is_err());
    }

    #[test]
    fn periodic_wrap() {
        let w = LatticeWindow::new(1, 2, Boundary::Periodic);
        assert_eq!(w.displacement(&[2], &[-2]), vec![-1]);
        assert_eq!(w.displacement(&[-2], &[2]), vec![1]);
        let u = LatticeWindow::new(1, 2, Boundary::Unbounded);
        assert_eq!(u.displacement(&[2], &[-2]), vec![4]);
    }
}
