/// Indices of the lower convex hull of points sorted by strictly increasing `x`.
///
/// Andrew's monotone chain. A middle point is dropped when it lies on or
/// above the chord of its neighbours, up to `tol` (scaled by the chord).
pub fn lower_hull(xs: &[f64], ys: &[f64], tol: f64) -> Vec<usize> {
    assert_eq!(xs.len(), ys.len());
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // y_b compared against the chord from a to i, evaluated at x_b.
            let t = (xs[b] - xs[a]) / (xs[i] - xs[a]);
            let chord = ys[a] + t * (ys[i] - ys[a]);
            let scale = ys[a].abs().max(ys[i].abs()).max(1.0);
            if ys[b] >= chord - tol * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_points_are_all_kept() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert_eq!(lower_hull(&xs, &ys, 1e-14).len(), 10);
    }

    #[test]
    fn bump_is_bridged() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.0, 1.0, 3.0, 1.0, 0.5];
        assert_eq!(lower_hull(&xs, &ys, 1e-14), vec![0, 4]);
    }
}
