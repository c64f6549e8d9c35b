//! Compressed size, ratio and normalised compression distance of a few runs.

use tilekmc::complexity::{compress_len, compression_ratio, ncd, ParamPoint};
use tilekmc::config::SimulationSection;
use tilekmc::render::{canonical_bytes, rasterize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let section = SimulationSection {
        lattice_side: 64,
        ..Default::default()
    };
    let points = [
        ("weak bonds", ParamPoint::new(0.5, 0.1, 0.1, 0.1)),
        ("mixed", ParamPoint::new(0.5, 0.5, 0.5, 0.5)),
        ("strong A-B", ParamPoint::new(1.0, 0.1, 0.1, 1.0)),
    ];
    let mut rasters = Vec::new();
    println!("{:<12} {:>8} {:>8}", "run", "C bits", "ratio");
    for (name, p) in points {
        let result = tilekmc::run(section.resolve(Some(p), 1)?)?;
        let bytes = canonical_bytes(&rasterize(&result.lattice, 1)).to_vec();
        let c = compress_len(&bytes)?;
        println!("{name:<12} {c:>8} {:>8.4}", compression_ratio(c, bytes.len())?);
        rasters.push((name, bytes));
    }
    println!("\nNCD");
    for (a, x) in &rasters {
        let row: Vec<String> = rasters.iter().map(|(_, y)| format!("{:.3}", ncd(x, y).unwrap())).collect();
        println!("{a:<12} {}", row.join("  "));
    }
    Ok(())
}
