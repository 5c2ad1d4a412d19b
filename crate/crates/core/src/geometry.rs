//! Integer-lattice cube bookkeeping.
//!
//! A cube `Λ_L(x)` of odd side `L` is realized as the set of lattice sites
//! within sup-distance `(L-1)/2` of `x`. Cubes whose side is an odd multiple
//! of three are *suitable*: their one-third interior `Λ_{L/3}(x)` is again a
//! lattice cube, and the boundary shell `Λ_L(x) \ Λ_{L-2}(x)` is one site
//! thick. All site lists are emitted in lexicographic order, which fixes
//! matrix indices and argmax tie-breaks throughout the crate.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A site of `Z^d`. Ordering is lexicographic in the coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(SmallVec<[i64; 4]>);

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Self {
        assert!(!coords.is_empty(), "lattice dimension must be at least 1");
        LatticePoint(SmallVec::from_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1, "lattice dimension must be at least 1");
        LatticePoint(SmallVec::from_elem(0, dim))
    }

    /// `(offset, 0, ..., 0)`.
    pub fn along_first_axis(dim: usize, offset: i64) -> Self {
        let mut p = Self::origin(dim);
        p.0[0] = offset;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn translate(&self, by: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), by.dim());
        LatticePoint(self.0.iter().zip(by.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// Sup-norm `max_i |x_i|`.
    pub fn norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Sup-norm distance on `Z^d`.
pub fn lattice_distance(x: &LatticePoint, y: &LatticePoint) -> Result<u64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(x.0
        .iter()
        .zip(y.0.iter())
        .map(|(a, b)| a.abs_diff(*b))
        .max()
        .unwrap_or(0))
}

/// Minimum pairwise sup-distance between two site sets. `None` if either is empty.
pub fn set_distance(a: &[LatticePoint], b: &[LatticePoint]) -> Option<u64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| lattice_distance(x, y).unwrap_or(u64::MAX)))
        .min()
}

/// `L ∈ 3N \ 6N`.
pub fn is_suitable_side(side: u64) -> bool {
    side.is_multiple_of(3) && !side.is_multiple_of(2)
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    center: LatticePoint,
    side: u64,
}

impl fmt::Debug for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Λ_{}{}", self.side, self.center)
    }
}

/// Builds `Λ_side(center)`; the side must be odd and positive.
pub fn make_cube(center: LatticePoint, side: u64) -> Result<Cube> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "cube side must be a positive odd integer, got {side}"
        )));
    }
    Ok(Cube { center, side })
}

impl Cube {
    pub fn centered(dim: usize, side: u64) -> Result<Cube> {
        make_cube(LatticePoint::origin(dim), side)
    }

    pub fn center(&self) -> &LatticePoint {
        &self.center
    }

    pub fn side(&self) -> u64 {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn half_width(&self) -> u64 {
        (self.side - 1) / 2
    }

    pub fn is_suitable(&self) -> bool {
        is_suitable_side(self.side)
    }

    pub fn volume(&self) -> usize {
        (self.side as usize).pow(self.dim() as u32)
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim() && lattice_distance(&self.center, p).is_ok_and(|d| d <= self.half_width())
    }

    /// True when every site of `other` lies in `self`.
    pub fn contains_cube(&self, other: &Cube) -> bool {
        lattice_distance(&self.center, &other.center)
            .is_ok_and(|d| d + other.half_width() <= self.half_width())
    }

    /// Strict containment that also keeps `other` off the outermost layer of `self`.
    pub fn strictly_contains_cube(&self, other: &Cube) -> bool {
        lattice_distance(&self.center, &other.center)
            .is_ok_and(|d| d + other.half_width() < self.half_width())
    }

    pub fn is_disjoint(&self, other: &Cube) -> bool {
        match lattice_distance(&self.center, &other.center) {
            Ok(d) => d > self.half_width() + other.half_width(),
            Err(_) => true,
        }
    }

    /// Concentric cube of the given odd side; `None` when `side` is zero.
    pub fn concentric(&self, side: u64) -> Option<Cube> {
        (side > 0).then(|| Cube {
            center: self.center.clone(),
            side,
        })
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> Vec<LatticePoint> {
        let d = self.dim();
        let h = self.half_width() as i64;
        let lo: SmallVec<[i64; 4]> = self.center.0.iter().map(|c| c - h).collect();
        let side = self.side as i64;
        let mut out = Vec::with_capacity(self.volume());
        let mut cur = lo.clone();
        loop {
            out.push(LatticePoint(cur.clone()));
            // odometer with the last coordinate fastest
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                cur[axis] += 1;
                if cur[axis] < lo[axis] + side {
                    break;
                }
                cur[axis] = lo[axis];
            }
        }
    }

    /// Position of `p` in the canonical ordering of [`Cube::sites`].
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let h = self.half_width() as i64;
        let side = self.side as usize;
        let mut idx = 0usize;
        for (x, c) in p.0.iter().zip(self.center.0.iter()) {
            idx = idx * side + (x - (c - h)) as usize;
        }
        Some(idx)
    }

    /// Inverse of [`Cube::index_of`].
    pub fn site_at(&self, mut index: usize) -> LatticePoint {
        let d = self.dim();
        let side = self.side as usize;
        let h = self.half_width() as i64;
        let mut coords: SmallVec<[i64; 4]> = SmallVec::from_elem(0, d);
        for axis in (0..d).rev() {
            coords[axis] = self.center.0[axis] - h + (index % side) as i64;
            index /= side;
        }
        LatticePoint(coords)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Interior,
    Boundary,
    Full,
    Custom,
}

/// A sub-region of a cube, carrying its sites in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    owner: Cube,
    kind: RegionKind,
    sites: Vec<LatticePoint>,
}

/// The interior `Λ_{L/3}`, boundary shell `Λ_L \ Λ_{L-2}`, or the full cube.
pub fn region(cube: &Cube, kind: RegionKind) -> Result<Region> {
    let sites = match kind {
        RegionKind::Full => cube.sites(),
        RegionKind::Interior => {
            if !cube.is_suitable() {
                return Err(Error::invalid(format!(
                    "interior of non-suitable cube {cube:?} (side must be an odd multiple of 3)"
                )));
            }
            cube.concentric(cube.side / 3).expect("side/3 > 0").sites()
        }
        RegionKind::Boundary => {
            let h = cube.half_width();
            cube.sites()
                .into_iter()
                .filter(|p| lattice_distance(&cube.center, p).unwrap() == h)
                .collect()
        }
        RegionKind::Custom => {
            return Err(Error::invalid("use Region::custom for explicit site sets"));
        }
    };
    Ok(Region {
        owner: cube.clone(),
        kind,
        sites,
    })
}

impl Region {
    /// Arbitrary site subset of `owner`; sites are sorted and deduplicated.
    pub fn custom(owner: &Cube, sites: impl IntoIterator<Item = LatticePoint>) -> Result<Region> {
        let set: BTreeSet<LatticePoint> = sites.into_iter().collect();
        if let Some(bad) = set.iter().find(|p| !owner.contains(p)) {
            return Err(Error::invalid(format!("site {bad} lies outside {owner:?}")));
        }
        Ok(Region {
            owner: owner.clone(),
            kind: RegionKind::Custom,
            sites: set.into_iter().collect(),
        })
    }

    /// Sites of `sub` that fall inside `owner`.
    pub fn clipped(owner: &Cube, sub: &Cube) -> Region {
        let sites = sub.sites().into_iter().filter(|p| owner.contains(p));
        Region::custom(owner, sites).expect("clipped sites lie in owner")
    }

    pub fn owner(&self) -> &Cube {
        &self.owner
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Matrix indices of the sites relative to the owning cube.
    pub fn indices(&self) -> Vec<usize> {
        self.sites
            .iter()
            .map(|p| self.owner.index_of(p).expect("region sites lie in owner"))
            .collect()
    }

    /// Re-expresses the same sites relative to a larger cube.
    pub fn rebase(&self, owner: &Cube) -> Result<Region> {
        Region::custom(owner, self.sites.iter().cloned())
    }
}

/// The lattice `(L/3) Z^d` restricted to a bounding cube.
#[derive(Clone, Debug)]
pub struct ScaleGrid {
    scale: u64,
    bound: Cube,
}

impl ScaleGrid {
    pub fn new(scale: u64, bound: Cube) -> Result<ScaleGrid> {
        if !is_suitable_side(scale) {
            return Err(Error::invalid(format!("grid scale {scale} is not suitable")));
        }
        Ok(ScaleGrid { scale, bound })
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn spacing(&self) -> i64 {
        (self.scale / 3) as i64
    }

    pub fn bound(&self) -> &Cube {
        &self.bound
    }

    /// Grid points inside the bounding cube, lexicographically.
    pub fn sites(&self) -> Vec<LatticePoint> {
        let s = self.spacing();
        let h = self.bound.half_width() as i64;
        let axes: Vec<Vec<i64>> = self
            .bound
            .center
            .0
            .iter()
            .map(|&c| {
                let lo = (c - h).div_euclid(s) + i64::from((c - h).rem_euclid(s) != 0);
                let hi = (c + h).div_euclid(s);
                (lo..=hi).map(|k| k * s).collect()
            })
            .collect();
        cartesian(&axes)
    }

    /// Nearest grid point; its interior cube `Λ_{L/3}` contains `p`.
    pub fn nearest(&self, p: &LatticePoint) -> LatticePoint {
        let s = self.spacing();
        let h = s / 2;
        LatticePoint(p.0.iter().map(|&x| (x + h).div_euclid(s) * s).collect())
    }
}

fn cartesian(axes: &[Vec<i64>]) -> Vec<LatticePoint> {
    let mut out: Vec<SmallVec<[i64; 4]>> = vec![SmallVec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(LatticePoint).collect()
}

/// Suitable cubes of the grid's scale whose interiors cover every site of
/// `sites`. Interiors of grid-centered cubes tile `Z^d`, so the cover is
/// exact: each site lies in exactly one returned interior.
pub fn grid_cover(sites: &[LatticePoint], grid: &ScaleGrid) -> Result<Vec<Cube>> {
    let centers: BTreeSet<LatticePoint> = sites.iter().map(|p| grid.nearest(p)).collect();
    if let Some(outside) = centers.iter().find(|c| !grid.bound.contains(c)) {
        return Err(Error::invalid(format!(
            "cover needs grid point {outside} outside the grid bound {:?}",
            grid.bound
        )));
    }
    centers
        .into_iter()
        .map(|c| make_cube(c, grid.scale))
        .collect()
}

/// `M_i = Λ_{3 L_{i+1}}(0) \ Λ_{3 L_i}(0)`.
#[derive(Clone, Debug)]
pub struct Annulus {
    index: usize,
    inner: Cube,
    outer: Cube,
}

impl Annulus {
    pub fn new(index: usize, ladder: &[u64], dim: usize) -> Result<Annulus> {
        if index + 1 >= ladder.len() {
            return Err(Error::invalid(format!(
                "annulus index {index} needs scales up to {} but ladder has {}",
                index + 1,
                ladder.len()
            )));
        }
        Ok(Annulus {
            index,
            inner: Cube::centered(dim, 3 * ladder[index])?,
            outer: Cube::centered(dim, 3 * ladder[index + 1])?,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn inner(&self) -> &Cube {
        &self.inner
    }

    pub fn outer(&self) -> &Cube {
        &self.outer
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.outer.contains(p) && !self.inner.contains(p)
    }

    pub fn sites(&self) -> Vec<LatticePoint> {
        self.outer
            .sites()
            .into_iter()
            .filter(|p| !self.inner.contains(p))
            .collect()
    }
}

pub fn annulus_sites(index: usize, ladder: &[u64], dim: usize) -> Result<Vec<LatticePoint>> {
    Ok(Annulus::new(index, ladder, dim)?.sites())
}
