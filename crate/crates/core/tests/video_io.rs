use std::fs::File;
use std::io::{BufWriter, Write};

use intrarc::video::{write_raw_frame, write_y4m};
use intrarc::{open_raw_yuv, open_y4m, ChromaFormat, Error, PlanarFrame, VideoGeometry};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frames(geometry: VideoGeometry, n: usize, seed: u64) -> Vec<PlanarFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = geometry.max_sample();
    (0..n)
        .map(|i| {
            let mut plane = |len: usize| (0..len).map(|_| rng.random_range(0..=max)).collect::<Vec<u16>>();
            let y = plane(geometry.luma_len());
            let u = plane(geometry.chroma_len());
            let v = plane(geometry.chroma_len());
            PlanarFrame::new(geometry, y, u, v, i).unwrap()
        })
        .collect()
}

fn geometry_strategy() -> impl Strategy<Value = VideoGeometry> {
    (32usize..48, 32usize..48, prop_oneof![Just(8u8), Just(10u8)], any::<bool>()).prop_map(|(w, h, depth, mono)| {
        let chroma = if mono { ChromaFormat::Mono } else { ChromaFormat::Yuv420 };
        VideoGeometry::new(w * 2, h * 2, depth, chroma, 25, 1).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn raw_round_trip(g in geometry_strategy(), n in 1usize..4, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.yuv");
        let src = frames(g, n, seed);
        let mut w = BufWriter::new(File::create(&path).unwrap());
        for f in &src {
            write_raw_frame(&mut w, f).unwrap();
        }
        w.flush().unwrap();
        drop(w);
        let back: Vec<PlanarFrame> = open_raw_yuv(&path, g).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, src);
    }

    #[test]
    fn y4m_round_trip(g in geometry_strategy(), n in 0usize..4, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        let src = frames(g, n, seed);
        let mut w = BufWriter::new(File::create(&path).unwrap());
        write_y4m(&mut w, &g, &src).unwrap();
        w.flush().unwrap();
        drop(w);
        let reader = open_y4m(&path).unwrap();
        prop_assert_eq!(*reader.geometry(), g);
        let back: Vec<PlanarFrame> = reader.collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, src);
    }
}

#[test]
fn truncated_file_names_the_broken_frame() {
    let g = VideoGeometry::yuv420_8bit(64, 64, 30, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.y4m");
    let mut bytes = Vec::new();
    write_y4m(&mut bytes, &g, &frames(g, 2, 1)).unwrap();
    bytes.truncate(bytes.len() - 100);
    std::fs::write(&path, bytes).unwrap();
    let results: Vec<_> = open_y4m(&path).unwrap().collect();
    assert!(results[0].is_ok());
    assert!(matches!(results[1], Err(Error::TruncatedFrame { index: 1 })));
}

#[test]
fn raw_size_error_states_frame_bytes() {
    let g = VideoGeometry::yuv420_8bit(64, 64, 30, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("odd.yuv");
    std::fs::write(&path, vec![0u8; g.frame_bytes() + 1]).unwrap();
    let err = open_raw_yuv(&path, g).err().unwrap();
    assert!(err.to_string().contains(&g.frame_bytes().to_string()), "{err}");
}

#[test]
fn unsupported_layouts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for header in ["YUV4MPEG2 W64 H64 F30:1 Ip C422\n", "YUV4MPEG2 W64 H64 F30:1 It C420\n"] {
        let path = dir.path().join("bad.y4m");
        std::fs::write(&path, header).unwrap();
        assert!(open_y4m(&path).is_err(), "{header}");
    }
}
