//! Minimal SVG renders of the first two chart axes. Presentation only.

use std::fmt::Write as _;

use palmcox::Window;

const SIZE: f64 = 600.0;
const MAX_RASTER: usize = 128;

struct Frame {
    lo: [f64; 2],
    scale: [f64; 2],
}

impl Frame {
    fn new(w: &Window) -> Self {
        let lo = [w.lo()[0], w.lo()[1]];
        let len = [w.hi()[0] - lo[0], w.hi()[1] - lo[1]];
        Self {
            lo,
            scale: [SIZE / len[0], SIZE / len[1]],
        }
    }

    fn map(&self, x: &[f64]) -> (f64, f64) {
        let px = (x[0] - self.lo[0]) * self.scale[0];
        // SVG y grows downwards.
        let py = SIZE - (x[1] - self.lo[1]) * self.scale[1];
        (px, py)
    }
}

fn open() -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n")
}

fn color(k: u64) -> String {
    // Golden-angle hue walk keeps neighbouring classes distinguishable.
    let hue = (k as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},65%,55%)")
}

/// Points projected onto axes 0 and 1 of `frame`, coloured by `class`, with
/// optional edges between point indices.
pub fn scatter(frame: &Window, points: &[Vec<f64>], class: Option<&[usize]>, edges: &[(u32, u32)]) -> Option<String> {
    if frame.dim() < 2 {
        return None;
    }
    let f = Frame::new(frame);
    let mut s = open();
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\" stroke=\"black\"/>\n<g stroke=\"#888\" stroke-width=\"0.6\">\n");
    for &(a, b) in edges {
        let (x1, y1) = f.map(&points[a as usize]);
        let (x2, y2) = f.map(&points[b as usize]);
        writeln!(s, "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>").unwrap();
    }
    s.push_str("</g>\n<g>\n");
    for (i, p) in points.iter().enumerate() {
        let (x, y) = f.map(p);
        let c = class.map_or_else(|| "black".to_string(), |c| color(c[i] as u64));
        writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"{c}\"/>").unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    Some(s)
}

/// A 2-D owner raster, subsampled to at most 128 cells per axis.
pub fn raster(shape: &[usize], owners: &[u32]) -> Option<String> {
    if shape.len() != 2 || shape.contains(&0) {
        return None;
    }
    let (nx, ny) = (shape[0], shape[1]);
    let step = nx.max(ny).div_ceil(MAX_RASTER);
    let (cw, ch) = (SIZE * step as f64 / nx as f64, SIZE * step as f64 / ny as f64);
    let mut s = open();
    for j in (0..ny).step_by(step) {
        for i in (0..nx).step_by(step) {
            let o = owners[j * nx + i];
            let x = SIZE * i as f64 / nx as f64;
            let y = SIZE - SIZE * j as f64 / ny as f64 - ch;
            writeln!(
                s,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{}\"/>",
                color(u64::from(o))
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_maps_corners() {
        let w = Window::cube(2, 0.0, 2.0).unwrap();
        let s = scatter(&w, &[vec![0.0, 0.0], vec![2.0, 2.0]], None, &[(0, 1)]).unwrap();
        assert!(s.contains("cx=\"0.00\" cy=\"600.00\""));
        assert!(s.contains("cx=\"600.00\" cy=\"0.00\""));
        assert!(s.contains("<line"));
        assert!(scatter(&Window::cube(1, 0.0, 1.0).unwrap(), &[], None, &[]).is_none());
    }

    #[test]
    fn raster_is_subsampled() {
        let owners = vec![0u32; 512 * 512];
        let s = raster(&[512, 512], &owners).unwrap();
        assert_eq!(s.matches("<rect").count(), 128 * 128);
        assert!(raster(&[4, 4, 4], &[0; 64]).is_none());
    }
}
