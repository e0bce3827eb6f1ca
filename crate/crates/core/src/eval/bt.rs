//! Bradley–Terry strength fitting: full-batch gradient descent on the
//! binary cross-entropy loss with a backtracking line search, one anchor
//! coefficient pinned to exactly 0 per connected component.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, MatchLog};

/// Separation guard: no fitted strength may leave [-XI_CLAMP, XI_CLAMP].
pub const XI_CLAMP: f64 = 20.0;

// Sufficient-decrease constant. 0.5 (rather than the textbook 1e-4) caps
// accepted steps near 1/L on quadratic-like regions, which keeps plain
// gradient descent contracting instead of oscillating at the stability edge.
const ARMIJO_C: f64 = 0.5;
const MIN_STEP: f64 = 1e-18;

/// Fitted strengths, aligned with `competitors` (lexicographic order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTFit {
    pub competitors: Vec<String>,
    pub xi: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Connected components of the comparison graph (1 when connected).
    pub components: usize,
}

impl BTFit {
    pub fn strength_of(&self, name: &str) -> Option<f64> {
        self.competitors
            .iter()
            .position(|c| c == name)
            .map(|i| self.xi[i])
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x), stable at both tails.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Aggregated win counts: (winner index, loser index, count).
fn pair_counts(log: &MatchLog, index: &BTreeMap<&str, usize>) -> Vec<(usize, usize, f64)> {
    let mut counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for m in log.matches() {
        let i = index[m.a.as_str()];
        let j = index[m.b.as_str()];
        let (winner, loser) = if m.winner == m.a { (i, j) } else { (j, i) };
        *counts.entry((winner, loser)).or_insert(0.0) += 1.0;
    }
    counts.into_iter().map(|((w, l), n)| (w, l, n)).collect()
}

/// BCE loss: each win of i over j contributes -ln sigma(xi_i - xi_j).
fn loss(pairs: &[(usize, usize, f64)], xi: &[f64]) -> f64 {
    pairs
        .iter()
        .map(|&(w, l, n)| n * softplus(xi[l] - xi[w]))
        .sum()
}

/// Gradient of the BCE loss, with anchored coordinates masked to zero.
fn gradient(pairs: &[(usize, usize, f64)], xi: &[f64], anchored: &[bool]) -> Vec<f64> {
    let mut grad = vec![0.0; xi.len()];
    for &(w, l, n) in pairs {
        let miss = n * (1.0 - sigmoid(xi[w] - xi[l]));
        grad[w] -= miss;
        grad[l] += miss;
    }
    for (g, &pinned) in grad.iter_mut().zip(anchored) {
        if pinned {
            *g = 0.0;
        }
    }
    grad
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Connected components of the comparison graph; returns one component id
/// per competitor. Ids are assigned in order of first (lowest-index) member.
fn components(n: usize, pairs: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut adjacency = vec![Vec::new(); n];
    for &(w, l, _) in pairs {
        adjacency[w].push(l);
        adjacency[l].push(w);
    }
    let mut component = vec![usize::MAX; n];
    let mut next_id = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut queue = vec![start];
        component[start] = next_id;
        while let Some(node) = queue.pop() {
            for &neighbor in &adjacency[node] {
                if component[neighbor] == usize::MAX {
                    component[neighbor] = next_id;
                    queue.push(neighbor);
                }
            }
        }
        next_id += 1;
    }
    component
}

/// Fit Bradley–Terry strengths by minimizing the BCE loss over all observed
/// matches. The lexicographically first competitor of each connected
/// component is pinned to exactly 0; a disconnected comparison graph is fit
/// per component with a warning. Perfect separation is clamped to
/// [-XI_CLAMP, XI_CLAMP] and reported as non-converged.
pub fn fit_bradley_terry(
    log: &MatchLog,
    tol: f64,
    max_iter: usize,
) -> Result<BTFit, EvalError> {
    if log.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let competitors = log.competitors();
    let n = competitors.len();
    let index: BTreeMap<&str, usize> = competitors
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let pairs = pair_counts(log, &index);

    let component_of = components(n, &pairs);
    let component_count = component_of.iter().max().map_or(0, |&m| m + 1);
    if component_count > 1 {
        eprintln!(
            "warning: comparison graph has {component_count} connected components; \
             fitting each with an independent anchor"
        );
    }
    // One anchor per component: its lowest-index (lexicographically first)
    // member. Competitor 0 is always an anchor, so xi[0] stays exactly 0.
    let mut anchored = vec![false; n];
    let mut seen = vec![false; component_count];
    for i in 0..n {
        if !seen[component_of[i]] {
            seen[component_of[i]] = true;
            anchored[i] = true;
        }
    }

    let mut xi = vec![0.0f64; n];
    let mut step = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;
    // Near the optimum the true per-step decrease t*|g|^2 drops below the
    // float resolution of the loss, so loss comparisons stop being
    // informative long before the gradient tolerance is met. When the line
    // search hits that plateau, continue with the last accepted step and
    // watch the gradient norm instead (halving the step whenever it grows).
    let mut plateau = false;
    let mut previous_norm = f64::INFINITY;
    for _ in 0..max_iter {
        let grad = gradient(&pairs, &xi, &anchored);
        let grad_norm = norm(&grad);
        if grad_norm < tol {
            converged = true;
            break;
        }
        if !plateau {
            let current_loss = loss(&pairs, &xi);
            // Backtracking line search, warm-started at twice the last
            // accepted step so flat (near-separated) directions can still
            // make progress.
            let mut t = step * 2.0;
            let mut accepted = false;
            while t > MIN_STEP {
                let candidate: Vec<f64> = xi
                    .iter()
                    .zip(&grad)
                    .map(|(&x, &g)| (x - t * g).clamp(-XI_CLAMP, XI_CLAMP))
                    .collect();
                let moved = candidate.iter().zip(&xi).any(|(&c, &x)| c != x);
                // Sufficient decrease against the movement actually made
                // (clamping can shorten the raw step).
                let required: f64 = ARMIJO_C
                    * grad
                        .iter()
                        .zip(xi.iter().zip(&candidate))
                        .map(|(&g, (&x, &c))| g * (x - c))
                        .sum::<f64>();
                // Strict: an equal-rounded loss means the decrease underflowed
                // f64, which is the plateau the fixed-step phase handles.
                if moved && loss(&pairs, &candidate) < current_loss - required {
                    xi = candidate;
                    step = t;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                iterations += 1;
                continue;
            }
            plateau = true;
            previous_norm = grad_norm;
        }
        if grad_norm > previous_norm {
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
        previous_norm = grad_norm;
        let candidate: Vec<f64> = xi
            .iter()
            .zip(&grad)
            .map(|(&x, &g)| (x - step * g).clamp(-XI_CLAMP, XI_CLAMP))
            .collect();
        if !candidate.iter().zip(&xi).any(|(&c, &x)| c != x) {
            // Pinned against the clamp or below coordinate resolution: no
            // step can move the iterate.
            break;
        }
        xi = candidate;
        iterations += 1;
    }

    if xi.iter().any(|&x| x.abs() >= XI_CLAMP) {
        eprintln!(
            "warning: perfect separation detected; strengths clamped at +/-{XI_CLAMP} \
             and fit marked non-converged"
        );
        converged = false;
    }

    Ok(BTFit {
        competitors,
        xi,
        converged,
        iterations,
        components: component_count,
    })
}

/// Competitors sorted by fitted strength, descending; ties broken
/// lexicographically.
pub fn rank(fit: &BTFit) -> Vec<String> {
    let mut order: Vec<(f64, &String)> = fit
        .xi
        .iter()
        .copied()
        .zip(&fit.competitors)
        .collect();
    order.sort_by(|(xa, na), (xb, nb)| {
        xb.partial_cmp(xa)
            .expect("finite strengths")
            .then_with(|| na.cmp(nb))
    });
    order.into_iter().map(|(_, name)| name.clone()).collect()
}
