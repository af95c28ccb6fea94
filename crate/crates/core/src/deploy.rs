//! Hexagonal tri-sector layout and UE dropping.
//!
//! Each site carries three sector cells with bearings 0°, 120° and 240°.
//! A cell is a hexagon of radius ISD/3 with one vertex on its site and the
//! opposite vertex along the bearing, so the three cells of a site tile the
//! plane together with the neighbouring sites, which lie at bearings that
//! are multiples of 60°.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::rng::{substream, Stream};

pub const CELLS_PER_SITE: usize = 3;
pub const BEARINGS_DEG: [f64; CELLS_PER_SITE] = [0.0, 120.0, 240.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: usize,
    pub position: Vec3,
    pub cells: [Cell; CELLS_PER_SITE],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub site: usize,
    /// Index within the site (0..3).
    pub index: usize,
    pub bearing_deg: f64,
    pub mech_tilt_deg: f64,
    pub elec_tilt_deg: f64,
    pub p_tx_dbm: f64,
}

impl Cell {
    /// Flat index across the layout: `site·3 + index`.
    pub fn global_index(&self) -> usize {
        self.site * CELLS_PER_SITE + self.index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub isd: f64,
    pub h_bs: f64,
    pub sites: Vec<Site>,
    /// Translation vectors of the wrap-around images (empty without
    /// wrap-around).
    pub wrap_shifts: Vec<Vec3>,
}

fn lattice_point(q: i64, r: i64, isd: f64) -> Vec3 {
    Vec3::new(
        isd * (q as f64 + 0.5 * r as f64),
        isd * (3f64.sqrt() / 2.0) * r as f64,
        0.0,
    )
}

/// Center site plus `n_rings` hexagonal rings.
pub fn hex_layout(n_rings: usize, isd: f64, h_bs: f64, p_tx_dbm: f64) -> Result<Layout> {
    if !(isd > 0.0) {
        return Err(Error::invalid(format!("ISD must be positive, got {isd}")));
    }
    let n = n_rings as i64;
    let mut axial = Vec::new();
    for q in -n..=n {
        for r in -n..=n {
            let ring = q.abs().max(r.abs()).max((q + r).abs());
            if ring <= n {
                axial.push((ring, q, r));
            }
        }
    }
    // ring, then counter-clockwise angle starting at 0°
    axial.sort_by(|a, b| {
        let pa = lattice_point(a.1, a.2, 1.0);
        let pb = lattice_point(b.1, b.2, 1.0);
        let ang = |p: Vec3| p.y.atan2(p.x).rem_euclid(TAU);
        a.0.cmp(&b.0).then(ang(pa).total_cmp(&ang(pb)))
    });
    let sites = axial
        .iter()
        .enumerate()
        .map(|(id, &(_, q, r))| {
            let p = lattice_point(q, r, isd);
            Site {
                id,
                position: Vec3::new(p.x, p.y, h_bs),
                cells: std::array::from_fn(|i| Cell {
                    site: id,
                    index: i,
                    bearing_deg: BEARINGS_DEG[i],
                    mech_tilt_deg: 0.0,
                    elec_tilt_deg: 0.0,
                    p_tx_dbm,
                }),
            }
        })
        .collect();
    Ok(Layout {
        isd,
        h_bs,
        sites,
        wrap_shifts: Vec::new(),
    })
}

impl Layout {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_cells(&self) -> usize {
        self.sites.len() * CELLS_PER_SITE
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.sites.iter().flat_map(|s| s.cells.iter())
    }

    pub fn cell(&self, global: usize) -> &Cell {
        &self.sites[global / CELLS_PER_SITE].cells[global % CELLS_PER_SITE]
    }

    /// Enables toroidal wrap-around: each UE sees, for every site, the
    /// nearest of the seven images of that site. Only defined for a full
    /// hexagonal patch of `n_rings` rings.
    pub fn with_wraparound(mut self, n_rings: usize) -> Result<Self> {
        let expected = 3 * n_rings * (n_rings + 1) + 1;
        if self.sites.len() != expected || n_rings == 0 {
            return Err(Error::invalid(
                "wrap-around needs a full hexagonal patch with >= 1 ring",
            ));
        }
        let n = n_rings as i64;
        let base = lattice_point(n + 1, n, self.isd);
        self.wrap_shifts = (0..6)
            .map(|k| {
                let (s, c) = (k as f64 * PI / 3.0).sin_cos();
                Vec3::new(c * base.x - s * base.y, s * base.x + c * base.y, 0.0)
            })
            .collect();
        Ok(self)
    }

    /// Position of `site` as seen from `ue_pos` (nearest wrap-around image).
    pub fn site_position_for(&self, site: usize, ue_pos: Vec3) -> Vec3 {
        let p = self.sites[site].position;
        let d = |q: Vec3| (q.x - ue_pos.x).hypot(q.y - ue_pos.y);
        let mut best = p;
        let mut best_d = d(p);
        for s in &self.wrap_shifts {
            let q = p + *s;
            let dq = d(q);
            if dq < best_d {
                best = q;
                best_d = dq;
            }
        }
        best
    }

    /// Vertices of the hexagonal coverage area of a cell (counter-clockwise).
    pub fn cell_hexagon(&self, cell: &Cell) -> [Vec3; 6] {
        let r = self.isd / 3.0;
        let site = self.sites[cell.site].position;
        let b = cell.bearing_deg.to_radians();
        let center = Vec3::new(site.x + r * b.cos(), site.y + r * b.sin(), 0.0);
        std::array::from_fn(|k| {
            let a = b + k as f64 * PI / 3.0;
            Vec3::new(center.x + r * a.cos(), center.y + r * a.sin(), 0.0)
        })
    }
}

/// Point-in-convex-polygon test on the horizontal plane.
pub fn inside_hexagon(hex: &[Vec3; 6], p: Vec3) -> bool {
    (0..6).all(|k| {
        let a = hex[k];
        let b = hex[(k + 1) % 6];
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -1e-9
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ue {
    pub id: usize,
    /// Cell whose area the UE was dropped in.
    pub drop_cell: usize,
    pub position: Vec3,
    pub indoor: bool,
    /// (floor n_fl, building floors x) for indoor UEs.
    pub floor: Option<(u32, u32)>,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropParams {
    pub indoor_fraction: f64,
    pub min_floors: u32,
    pub max_floors: u32,
    /// Minimum 2D distance to the own site (m).
    pub min_distance: f64,
    pub speed_kmh: f64,
}

impl Default for DropParams {
    fn default() -> Self {
        DropParams {
            indoor_fraction: 0.8,
            min_floors: 4,
            max_floors: 8,
            min_distance: 35.0,
            speed_kmh: 3.0,
        }
    }
}

/// UE height for floor `n_fl` (1-based).
pub fn floor_height(n_fl: u32) -> f64 {
    3.0 * (n_fl as f64 - 1.0) + 1.5
}

fn drop_position(layout: &Layout, cell: &Cell, min_distance: f64, seed: u64, ue: usize) -> Vec3 {
    let mut rng = substream(seed, Stream::DropPosition, &[ue as u64]);
    let hex = layout.cell_hexagon(cell);
    let site = layout.sites[cell.site].position;
    let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
    for v in &hex {
        lo = (lo.0.min(v.x), lo.1.min(v.y));
        hi = (hi.0.max(v.x), hi.1.max(v.y));
    }
    loop {
        let p = Vec3::new(
            rng.random_range(lo.0..hi.0),
            rng.random_range(lo.1..hi.1),
            0.0,
        );
        if inside_hexagon(&hex, p) && (p.x - site.x).hypot(p.y - site.y) >= min_distance {
            return p;
        }
    }
}

fn drop_velocity(params: &DropParams, seed: u64, ue: usize) -> Vec3 {
    let mut rng = substream(seed, Stream::DropVelocity, &[ue as u64]);
    let az: f64 = rng.random_range(-PI..PI);
    let v = params.speed_kmh / 3.6;
    Vec3::new(v * az.cos(), v * az.sin(), 0.0)
}

fn drop_with<F>(
    n: usize,
    layout: &Layout,
    params: &DropParams,
    seed: u64,
    height: F,
) -> Result<Vec<Ue>>
where
    F: Fn(usize) -> (bool, Option<(u32, u32)>, f64),
{
    if n == 0 {
        return Err(Error::invalid("need at least one UE"));
    }
    let n_cells = layout.n_cells();
    Ok((0..n)
        .map(|id| {
            let drop_cell = id % n_cells;
            let cell = layout.cell(drop_cell);
            let xy = drop_position(layout, cell, params.min_distance, seed, id);
            let (indoor, floor, h) = height(id);
            Ue {
                id,
                drop_cell,
                position: Vec3::new(xy.x, xy.y, h),
                indoor,
                floor,
                velocity: drop_velocity(params, seed, id),
            }
        })
        .collect())
}

/// 3D dropping: equal UE count per cell, uniform within each cell; indoor
/// with probability `indoor_fraction`, in a building of x ~ U{min..max}
/// floors on floor n_fl ~ U{1..x}.
pub fn drop_ues(n: usize, layout: &Layout, params: &DropParams, seed: u64) -> Result<Vec<Ue>> {
    if params.min_floors == 0 || params.max_floors < params.min_floors {
        return Err(Error::invalid("floor range must satisfy 1 <= min <= max"));
    }
    drop_with(n, layout, params, seed, |id| {
        let mut rng = substream(seed, Stream::DropHeight, &[id as u64]);
        let indoor = rng.random::<f64>() < params.indoor_fraction;
        if indoor {
            let x = rng.random_range(params.min_floors..=params.max_floors);
            let n_fl = rng.random_range(1..=x);
            (true, Some((n_fl, x)), floor_height(n_fl))
        } else {
            (false, None, 1.5)
        }
    })
}

/// Legacy 2D dropping: same positions as [`drop_ues`] for the same seed but
/// every UE outdoors at 1.5 m.
pub fn legacy_2d_drop(
    n: usize,
    layout: &Layout,
    params: &DropParams,
    seed: u64,
) -> Result<Vec<Ue>> {
    drop_with(n, layout, params, seed, |_| (false, None, 1.5))
}
