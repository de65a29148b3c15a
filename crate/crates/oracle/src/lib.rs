//! Brute-force reference computations. Slow on purpose; each routine avoids
//! the algorithms it is used to check.

/// Minimize `f` over a box by exhaustive grid search followed by repeated
/// zooming around the best grid point.
pub fn grid_argmin(
    f: impl Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    points_per_axis: usize,
    zooms: usize,
) -> (Vec<f64>, f64) {
    let d = lo.len();
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut best = lo.clone();
    let mut best_val = f64::INFINITY;
    for _ in 0..=zooms {
        let total = points_per_axis.pow(d as u32);
        let mut point = vec![0.0; d];
        for k in 0..total {
            let mut rem = k;
            for i in 0..d {
                let idx = rem % points_per_axis;
                rem /= points_per_axis;
                point[i] = lo[i] + (hi[i] - lo[i]) * idx as f64 / (points_per_axis - 1) as f64;
            }
            let v = f(&point);
            if v < best_val {
                best_val = v;
                best.copy_from_slice(&point);
            }
        }
        for i in 0..d {
            let h = 2.0 * (hi[i] - lo[i]) / (points_per_axis - 1) as f64;
            lo[i] = best[i] - h;
            hi[i] = best[i] + h;
        }
    }
    (best, best_val)
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Smallest mean cost `(1/k) Σ c[i][σ(i)]` over all permutations σ of a
/// `k × k` row-major cost matrix. By Birkhoff's theorem this is the optimal
/// transport cost between two uniform measures with `k` atoms each.
pub fn assignment_brute_force(cost: &[f64], k: usize) -> f64 {
    assert_eq!(cost.len(), k * k);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i * k + j]).sum::<f64>();
    // Heap's algorithm.
    let mut c = vec![0usize; k];
    best = best.min(eval(&perm));
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / k as f64
}

/// Optimal cost between two measures whose weights are integer multiples of
/// `1/k`, by splitting atoms and enumerating permutations.
pub fn split_atom_transport(cost: &[f64], supply: &[usize], demand: &[usize]) -> f64 {
    let k: usize = supply.iter().sum();
    assert_eq!(k, demand.iter().sum::<usize>());
    let n = demand.len();
    let rows: Vec<usize> = supply.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat(i).take(c)).collect();
    let cols: Vec<usize> = demand.iter().enumerate().flat_map(|(j, &c)| std::iter::repeat(j).take(c)).collect();
    let mut big = vec![0.0; k * k];
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            big[a * k + b] = cost[i * n + j];
        }
    }
    assignment_brute_force(&big, k)
}

/// `exp(M) v` for a dense row-major matrix by scaling and squaring of a long
/// Taylor series.
pub fn expm_apply(m: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| m[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let scale = 2f64.powi(-(s as i32));
    let a: Vec<f64> = m.iter().map(|x| x * scale).collect();
    let mut e = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for k in 1..30 {
        term = matmul(&term, &a, n);
        for x in term.iter_mut() {
            *x /= k as f64;
        }
        for (x, t) in e.iter_mut().zip(&term) {
            *x += t;
        }
    }
    for _ in 0..s {
        e = matmul(&e, &e, n);
    }
    (0..n).map(|i| (0..n).map(|j| e[i * n + j] * v[j]).sum()).collect()
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}
