/// 256-bin histogram equalization lookup table for `pixels`.
///
/// `out(v) = round(255 * (cdf(v) - cdf_min) / (N - cdf_min))`, rounding half up.
/// An image with a single distinct value maps to itself.
pub fn equalization_lut(pixels: &[u8]) -> [u8; 256] {
    let mut identity = [0u8; 256];
    for (i, v) in identity.iter_mut().enumerate() {
        *v = i as u8;
    }

    let mut hist = [0u64; 256];
    for &p in pixels {
        hist[p as usize] += 1;
    }
    let total = pixels.len() as u64;
    let Some(min_v) = hist.iter().position(|&c| c > 0) else {
        return identity;
    };
    let cdf_min = hist[min_v];
    if cdf_min == total {
        return identity;
    }

    let den = total - cdf_min;
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for v in 0..256 {
        cdf += hist[v];
        let num = cdf.saturating_sub(cdf_min);
        lut[v] = ((2 * 255 * num + den) / (2 * den)) as u8;
    }
    lut
}

pub fn equalize_in_place(pixels: &mut [u8]) {
    let lut = equalization_lut(pixels);
    for p in pixels.iter_mut() {
        *p = lut[*p as usize];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_unchanged() {
        let mut px = vec![42u8; 100];
        equalize_in_place(&mut px);
        assert!(px.iter().all(|&v| v == 42));
    }

    #[test]
    fn two_values_stretch_to_extremes() {
        let mut px: Vec<u8> = (0..100).map(|i| if i % 2 == 0 { 10 } else { 200 }).collect();
        equalize_in_place(&mut px);
        for (i, v) in px.iter().enumerate() {
            assert_eq!(*v, if i % 2 == 0 { 0 } else { 255 });
        }
    }

    #[test]
    fn three_values_by_hand() {
        // counts 2,1,1 -> cdf 2,3,4; cdf_min 2, den 2 -> 0, 127.5->128, 255
        let mut px = vec![5, 5, 9, 30];
        equalize_in_place(&mut px);
        assert_eq!(px, vec![0, 0, 128, 255]);
    }

    #[test]
    fn empty_is_identity() {
        let lut = equalization_lut(&[]);
        assert_eq!(lut[17], 17);
    }
}
