//! Writes the reference bi-convex lens and its equal-NA single-lens
//! counterpart as prescription files into the given directory.

use microlens::lens::{equal_na_single_lens, DESIGN_NA};
use microlens::LensDesign;

fn main() -> microlens::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let dir = std::path::Path::new(&dir);
    let lens = LensDesign::reference();
    lens.prescription().save(dir.join("biconvex.json"))?;
    LensDesign::as_fabricated().prescription().save(dir.join("as_fabricated.json"))?;
    let single = equal_na_single_lens(lens.limiting_diameter_um(), DESIGN_NA, lens.index, lens.wavelength_nm)?;
    single.save(dir.join("single.json"))?;
    Ok(())
}
