/// Bilinear resize of a row-major `in_h x in_w` image on a corner-aligned
/// grid: output pixel `(i, j)` samples source coordinate
/// `(i * (in_h-1)/(out_h-1), j * (in_w-1)/(out_w-1))`. A size-1 output axis
/// samples the source centre.
pub fn resize_image(img: &[f64], in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    assert_eq!(img.len(), in_h * in_w, "image buffer does not match {in_h}x{in_w}");
    let coord = |i: usize, n_in: usize, n_out: usize| -> f64 {
        if n_out == 1 {
            (n_in - 1) as f64 / 2.0
        } else {
            i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let y = coord(i, in_h, out_h);
        let y0 = (y.floor() as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = y - y0 as f64;
        for j in 0..out_w {
            let x = coord(j, in_w, out_w);
            let x0 = (x.floor() as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = x - x0 as f64;
            let top = img[y0 * in_w + x0] * (1.0 - fx) + img[y0 * in_w + x1] * fx;
            let bottom = img[y1 * in_w + x0] * (1.0 - fx) + img[y1 * in_w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}
