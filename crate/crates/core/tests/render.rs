use tilekmc::lattice::{Lattice, Orientation, Pos, SpeciesDescriptor, SpeciesSet, TileInstance};
use tilekmc::render::{encode_png, rasterize, read_raw, write_raw, Palette, Raster};

fn decode(bytes: &[u8]) -> (png::OutputInfo, Vec<u8>, Vec<u8>) {
    let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
    let palette = reader.info().palette.as_ref().unwrap().to_vec();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    buf.truncate(info.buffer_size());
    (info, buf, palette)
}

fn sample_lattice() -> Lattice {
    let set = SpeciesSet::new(
        vec![
            SpeciesDescriptor::new(1, "A", [0; 4], 0.5),
            SpeciesDescriptor::new(2, "B", [1; 4], 0.5),
        ],
        2,
    )
    .unwrap();
    let mut lat = Lattice::new(5, set).unwrap();
    for (s, r, c) in [(1, 0, 0), (2, 0, 1), (2, 3, 4), (1, 4, 2)] {
        lat.place(TileInstance::new(s, Orientation::new(0), Pos::new(r, c))).unwrap();
    }
    lat
}

#[test]
fn png_decodes_to_the_same_indices() {
    let raster = rasterize(&sample_lattice(), 3);
    let palette = Palette::for_species(2);
    let bytes = encode_png(&raster, &palette).unwrap();
    let (info, pixels, plte) = decode(&bytes);
    assert_eq!((info.width, info.height), (15, 15));
    assert_eq!(info.color_type, png::ColorType::Indexed);
    assert_eq!(info.bit_depth, png::BitDepth::Eight);
    assert_eq!(pixels, raster.pixels());
    assert_eq!(plte.len(), 3 * palette.len());
    assert_eq!(raster.get(3, 0), 2);
    assert_eq!(raster.get(14, 9), 2);
}

#[test]
fn png_bytes_are_stable() {
    let raster = Raster::new(4, 2, vec![0, 1, 2, 0, 2, 2, 1, 0]).unwrap();
    let bytes = encode_png(&raster, &Palette::for_species(2)).unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, GOLDEN);
}

#[test]
fn raw_round_trip() {
    let raster = rasterize(&sample_lattice(), 1);
    let mut buf = Vec::new();
    write_raw(&raster, &mut buf).unwrap();
    assert_eq!(read_raw(buf.as_slice()).unwrap(), raster);
    assert!(read_raw(&buf[..buf.len() - 1]).is_err());
}

const GOLDEN: &str = "89504e470d0a1a0a0000000d494844520000000400000002080300000048768d5100000009504c5445ffffffecc4202860d69f63989f000000124944415478da63606064626060626264000000300009464812cf0000000049454e44ae426082";
