use artrec_core::evf::{lbp_codes, lbp_histogram};
use artrec_core::imaging::{to_grayscale, ImageBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-pixel reference: compares the luma of each interior pixel
/// with its eight neighbors, clockwise from the top-left.
fn oracle_codes(img: &ImageBuffer) -> Vec<u8> {
    let luma = |x: u32, y: u32| match img.pixel(x, y) {
        [r, g, b] if r == g && g == b => r as f64,
        [r, g, b] => 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64,
    };
    let offsets: [(i32, i32); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];
    let mut codes = Vec::new();
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            let center = luma(x, y);
            let mut code = 0u8;
            for (bit, (dx, dy)) in offsets.iter().enumerate() {
                if luma((x as i32 + dx) as u32, (y as i32 + dy) as u32) >= center {
                    code |= 1 << bit;
                }
            }
            codes.push(code);
        }
    }
    codes
}

#[test]
fn codes_and_histograms_match_per_pixel_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let (w, h) = (rng.random_range(5..=16), rng.random_range(5..=16));
        // Few levels so that ties between neighbors are common.
        let levels = if case % 2 == 0 { 4 } else { 256 };
        let img = ImageBuffer::from_fn(w, h, |_, _| {
            let v = (rng.random_range(0..levels) * (256 / levels)) as u8;
            if case % 3 == 0 {
                [v, v, v]
            } else {
                [v, rng.random(), rng.random()]
            }
        })
        .unwrap();
        let want = oracle_codes(&img);
        assert_eq!(lbp_codes(&to_grayscale(&img)).unwrap(), want, "case {case}");

        let hist = lbp_histogram(&img).unwrap();
        let mut counts = [0u64; 256];
        for c in &want {
            counts[*c as usize] += 1;
        }
        let total = want.len() as f64;
        for (bin, &count) in counts.iter().enumerate() {
            assert_eq!(hist.bins()[bin], count as f64 / total, "case {case} bin {bin}");
        }
    }
}

#[test]
fn images_without_interior_are_rejected() {
    assert!(lbp_histogram(&ImageBuffer::filled(2, 9, [1, 2, 3]).unwrap()).is_err());
    assert!(lbp_histogram(&ImageBuffer::filled(9, 2, [1, 2, 3]).unwrap()).is_err());
    let flat = lbp_histogram(&ImageBuffer::filled(3, 3, [7, 7, 7]).unwrap()).unwrap();
    assert_eq!(flat.bins()[255], 1.0);
}
