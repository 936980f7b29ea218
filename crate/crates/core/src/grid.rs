//! Uniform tensor grids of samples over a box, with finite-difference jets.

use crate::geometry::GeometryError;
use crate::jet::{Jet3, MAX_VARS};
use crate::scalar::Real;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

/// Scalar samples on a uniform grid with `resolution` nodes per axis.
///
/// Storage is row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    bounds: Vec<(T, T)>,
    resolution: usize,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(bounds: Vec<(T, T)>, resolution: usize, values: Vec<T>) -> Result<Self, GeometryError> {
        let n = bounds.len();
        if n == 0 || n > MAX_VARS {
            return Err(GeometryError::InvalidDomain(format!("dimension {n} outside 1..=4")));
        }
        if resolution < 2 {
            return Err(GeometryError::InvalidDomain("grid resolution below 2".into()));
        }
        if bounds.iter().any(|(a, b)| !(b > a)) {
            return Err(GeometryError::InvalidDomain("empty axis interval".into()));
        }
        if values.len() != resolution.pow(n as u32) {
            return Err(GeometryError::InvalidDomain(format!(
                "expected {} grid values, found {}",
                resolution.pow(n as u32),
                values.len()
            )));
        }
        Ok(Self { bounds, resolution, values })
    }

    /// Samples `f` at every node.
    pub fn sample(bounds: Vec<(T, T)>, resolution: usize, mut f: impl FnMut(&[T]) -> T) -> Result<Self, GeometryError> {
        let n = bounds.len();
        let total = resolution.pow(n as u32);
        let mut values = Vec::with_capacity(total);
        let mut x = vec![T::zero(); n];
        let tmp = Self { bounds: bounds.clone(), resolution, values: Vec::new() };
        for flat in 0..total {
            let idx = tmp.unflatten(flat);
            for a in 0..n {
                x[a] = tmp.coord(a, idx[a]);
            }
            values.push(f(&x));
        }
        Self::new(bounds, resolution, values)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> T {
        let (a, b) = self.bounds[axis];
        (b - a) / T::lit((self.resolution - 1) as f64)
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.bounds[axis].0 + self.spacing(axis) * T::lit(i as f64)
    }

    pub fn node(&self, idx: &[usize]) -> Vec<T> {
        idx.iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.resolution + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let n = self.dim();
        let mut idx = vec![0; n];
        for a in (0..n).rev() {
            idx[a] = flat % self.resolution;
            flat /= self.resolution;
        }
        idx
    }

    /// Whether the node lies on the outer boundary of the box.
    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter().any(|&i| i == 0 || i + 1 == self.resolution)
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.values[self.flatten(idx)]
    }

    fn shifted(&self, idx: &[usize], shifts: &[(usize, i64)]) -> T {
        let mut j: Vec<usize> = idx.to_vec();
        for &(a, s) in shifts {
            j[a] = (j[a] as i64 + s) as usize;
        }
        self.at(&j)
    }

    /// Minimum distance of a node from the boundary, in cells.
    pub fn collar(&self, idx: &[usize]) -> usize {
        idx.iter().map(|&i| i.min(self.resolution - 1 - i)).min().unwrap_or(0)
    }

    /// Centered-difference second derivative matrix at a node at least one cell inside.
    pub fn hessian_at(&self, idx: &[usize]) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut h = vec![vec![T::zero(); n]; n];
        let u0 = self.at(idx);
        for i in 0..n {
            let hi = self.spacing(i);
            h[i][i] = (self.shifted(idx, &[(i, 1)]) - u0 * T::lit(2.0) + self.shifted(idx, &[(i, -1)])) / (hi * hi);
            for j in 0..i {
                let hj = self.spacing(j);
                let m = (self.shifted(idx, &[(i, 1), (j, 1)]) - self.shifted(idx, &[(i, 1), (j, -1)])
                    - self.shifted(idx, &[(i, -1), (j, 1)])
                    + self.shifted(idx, &[(i, -1), (j, -1)]))
                    / (T::lit(4.0) * hi * hj);
                h[i][j] = m;
                h[j][i] = m;
            }
        }
        h
    }

    /// Finite-difference jet at a node at least two cells inside the boundary.
    pub fn node_jet(&self, idx: &[usize]) -> Result<Jet3<T>, GeometryError> {
        if self.collar(idx) < 2 {
            return Err(GeometryError::OutOfDomain { x: self.node(idx).iter().map(|v| v.as_f64()).collect() });
        }
        let n = self.dim();
        let two = T::lit(2.0);
        let mut jet = Jet3::constant(n, self.at(idx));
        for i in 0..n {
            let h = self.spacing(i);
            jet.g[i] = (self.shifted(idx, &[(i, 1)]) - self.shifted(idx, &[(i, -1)])) / (two * h);
        }
        let hm = self.hessian_at(idx);
        for i in 0..n {
            for j in 0..n {
                jet.h[i][j] = hm[i][j];
            }
        }
        // Third derivatives by composing centered stencils.
        let d = |s: &[(usize, i64)]| self.shifted(idx, s);
        for i in 0..n {
            let hi = self.spacing(i);
            for j in 0..n {
                let hj = self.spacing(j);
                for k in 0..n {
                    let hk = self.spacing(k);
                    let v = if i == j && j == k {
                        (d(&[(i, 2)]) - two * d(&[(i, 1)]) + two * d(&[(i, -1)]) - d(&[(i, -2)])) / (two * hi * hi * hi)
                    } else if i == j || j == k || i == k {
                        let (p, q) = if i == j { (i, k) } else if j == k { (j, i) } else { (i, j) };
                        let hp = self.spacing(p);
                        let hq = self.spacing(q);
                        let second = |s: i64| d(&[(p, 1), (q, s)]) - two * d(&[(q, s)]) + d(&[(p, -1), (q, s)]);
                        (second(1) - second(-1)) / (two * hq * hp * hp)
                    } else {
                        let mut acc = T::zero();
                        for si in [-1i64, 1] {
                            for sj in [-1i64, 1] {
                                for sk in [-1i64, 1] {
                                    let s = T::lit((si * sj * sk) as f64);
                                    acc += s * d(&[(i, si), (j, sj), (k, sk)]);
                                }
                            }
                        }
                        acc / (T::lit(8.0) * hi * hj * hk)
                    };
                    jet.t[i][j][k] = v;
                }
            }
        }
        Ok(jet)
    }

    /// Jet at an arbitrary point, by multilinear interpolation of nodal jets.
    pub fn jet3(&self, x: &[T]) -> Result<Jet3<T>, GeometryError> {
        let n = self.dim();
        let oob = || GeometryError::OutOfDomain { x: x.iter().map(|v| v.as_f64()).collect() };
        if x.len() != n {
            return Err(oob());
        }
        let mut base = vec![0usize; n];
        let mut frac = vec![T::zero(); n];
        let two = T::lit(2.0);
        for a in 0..n {
            let h = self.spacing(a);
            let s = (x[a] - self.bounds[a].0) / h;
            let lo = two;
            let hi = T::lit((self.resolution - 3) as f64);
            let tol = T::lit(1e-9);
            if !(s >= lo - tol && s <= hi + tol) {
                return Err(oob());
            }
            let s = s.max(lo).min(hi);
            let mut i = s.floor().to_usize().unwrap_or(2);
            if i >= self.resolution - 3 {
                i = self.resolution - 4;
            }
            base[a] = i;
            frac[a] = s - T::lit(i as f64);
        }
        let mut out: Option<Jet3<T>> = None;
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            let mut idx = base.clone();
            for a in 0..n {
                if corner & (1 << a) != 0 {
                    idx[a] += 1;
                    w *= frac[a];
                } else {
                    w *= T::one() - frac[a];
                }
            }
            if w == T::zero() {
                continue;
            }
            let j = self.node_jet(&idx)? * w;
            out = Some(match out {
                Some(acc) => acc + j,
                None => j,
            });
        }
        Ok(out.unwrap_or_else(|| Jet3::constant(n, T::zero())))
    }

    /// Writes the CSV format: header `n,resolution,lo1,hi1,...` then row-major values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GeometryError> {
        let mut header = format!("{},{}", self.dim(), self.resolution);
        for (a, b) in &self.bounds {
            write!(header, ",{:.16e},{:.16e}", a.as_f64(), b.as_f64()).ok();
        }
        writeln!(w, "{header}")?;
        let row = self.resolution;
        for chunk in self.values.chunks(row) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, GeometryError> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| GeometryError::Parse("empty grid file".into()))??;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| GeometryError::Parse(format!("{s}: {e}")));
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| GeometryError::Parse(format!("{s}: {e}")));
        if fields.len() < 2 {
            return Err(GeometryError::Parse("grid header too short".into()));
        }
        let n = parse_usize(fields[0])?;
        let resolution = parse_usize(fields[1])?;
        if fields.len() != 2 + 2 * n {
            return Err(GeometryError::Parse(format!("header lists {} bounds for n = {n}", fields.len() - 2)));
        }
        let mut bounds = Vec::with_capacity(n);
        for a in 0..n {
            bounds.push((T::lit(parse_f(fields[2 + 2 * a])?), T::lit(parse_f(fields[3 + 2 * a])?)));
        }
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                values.push(T::lit(parse_f(tok.trim())?));
            }
        }
        Self::new(bounds, resolution, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_grid(res: usize) -> GridFunction<f64> {
        GridFunction::sample(vec![(-1.0, 1.0), (-1.0, 1.0)], res, |x: &[f64]| {
            x[0] * x[0] * x[1] + 0.5 * x[1] * x[1] + x[0].powi(3) / 6.0
        })
        .unwrap()
    }

    #[test]
    fn cubic_node_jet_is_exact() {
        let g = cubic_grid(21);
        let j = g.node_jet(&[12, 7]).unwrap();
        let x = g.node(&[12, 7]);
        assert!((j.h[0][1] - 2.0 * x[0]).abs() < 1e-12);
        assert!((j.t[0][0][1] - 2.0).abs() < 1e-10);
        assert!((j.t[0][0][0] - 1.0).abs() < 1e-10);
        assert!(j.t[1][1][1].abs() < 1e-10);
    }

    #[test]
    fn collar_is_enforced() {
        let g = cubic_grid(21);
        assert!(g.node_jet(&[1, 10]).is_err());
        assert!(g.jet3(&[-0.95, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = cubic_grid(9);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = GridFunction::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g, back);
    }
}
