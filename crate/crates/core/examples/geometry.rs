//! Cubes, interior and boundary regions, scale grids and annuli.
//!
//! ```bash
//! cargo run --example geometry
//! ```

use msa_lab::geometry::{
    grid_cover, is_suitable_side, lattice_distance, make_cube, region, Annulus, Cube, LatticePoint, RegionKind,
    ScaleGrid,
};
use msa_lab::msa::scale_ladder;

fn main() -> msa_lab::Result<()> {
    let x = LatticePoint::new(&[3, -1]);
    let y = LatticePoint::new(&[-2, 4]);
    println!("|x - y|_inf = {}", lattice_distance(&x, &y)?);

    let suitable: Vec<u64> = (1..=40).filter(|&l| is_suitable_side(l)).collect();
    println!("suitable sides up to 40: {suitable:?}");

    let cube = make_cube(LatticePoint::new(&[0, 0]), 9)?;
    let interior = region(&cube, RegionKind::Interior)?;
    let boundary = region(&cube, RegionKind::Boundary)?;
    println!(
        "Λ_9(0) in 2D: {} sites, interior {} sites, boundary shell {} sites",
        cube.volume(),
        interior.len(),
        boundary.len()
    );
    // the shell sits at sup-distance half_width from the center
    for p in boundary.sites().iter().take(4) {
        println!("  shell site {p} at distance {}", p.norm());
    }

    // cover a big box by scale-9 cubes centered on the grid (L/3)Z^d
    let big = Cube::centered(2, 27)?;
    let grid = ScaleGrid::new(9, big.clone())?;
    let cover = grid_cover(&big.sites(), &grid)?;
    println!("grid spacing {}, {} covering cubes for Λ_27", grid.spacing(), cover.len());

    let ladder = scale_ladder(9, 1.3, 4);
    println!("ladder {ladder:?}");
    for k in 0..ladder.len() - 1 {
        let a = Annulus::new(k, &ladder, 1)?;
        println!("  annulus {k}: Λ_{} minus Λ_{}, {} sites", a.outer().side(), a.inner().side(), a.sites().len());
    }
    Ok(())
}
