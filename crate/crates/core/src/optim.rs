//! Nelder-Mead simplex minimization.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_evaluations: usize,
    /// Stop once the spread of objective values across the simplex drops below this.
    pub f_tolerance: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evaluations: 500,
            f_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` from `start`, building the initial simplex by offsetting one
/// coordinate at a time by `steps[i]`. Standard coefficients (1, 2, 0.5, 0.5).
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    steps: &[f64],
    cfg: &NelderMeadConfig,
) -> Minimum {
    let n = start.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evaluations);
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    while evaluations < cfg.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= cfg.f_tolerance {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(&expanded, &mut evaluations);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let c = along(-0.5);
            let v = eval(&c, &mut evaluations);
            (c, v)
        } else {
            let c = along(0.5);
            let v = eval(&c, &mut evaluations);
            (c, v)
        };
        if fc < worst.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, xi)| b + 0.5 * (xi - b))
                .collect();
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }

    let (x, value) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex is never empty");
    Minimum { x, value, evaluations }
}
