//! Exhaustive search for the {x+y, xy} coloring threshold.
//!
//! M(r) is the least N such that every r-coloring of [N] contains a
//! monochromatic pair {x+y, xy} with both values in [N] (admissibility
//! per [`PatternConstraints`]: by default x, y >= 2 and x+y != xy).  A
//! good coloring of [N] restricts to a good coloring of [N-1], so
//! colorability is downward closed and M(r) is the first N where the
//! backtracking search exhausts every assignment.
//!
//! The searcher works on the deduplicated pair graph (vertices are the
//! values that occur in some admissible pattern, edges say "these two
//! must differ somewhere"), with the single symmetry reduction of fixing
//! the smallest constrained value's color.  Emitted colorings are always
//! re-checked by [`verify_coloring`], which shares no enumeration logic
//! with the search.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::patterns::PatternConstraints;

/// Default cap on backtracking nodes per single-N search.
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;

/// An r-coloring of [N]; entry i is the color of the value i+1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coloring {
    pub n: u64,
    pub r: u32,
    pub assignment: Vec<u32>,
}

impl Coloring {
    pub fn new(n: u64, r: u32, assignment: Vec<u32>) -> Result<Self> {
        if r == 0 {
            return Err(Error::param("need at least one color"));
        }
        if assignment.len() as u64 != n {
            return Err(Error::param(format!(
                "assignment length {} does not match N = {n}",
                assignment.len()
            )));
        }
        if let Some(bad) = assignment.iter().find(|&&c| c >= r) {
            return Err(Error::param(format!("color {bad} out of range for r = {r}")));
        }
        Ok(Coloring { n, r, assignment })
    }

    pub fn color_of(&self, value: u64) -> u32 {
        self.assignment[(value - 1) as usize]
    }

    /// Drops the values above m.  A good coloring stays good under
    /// restriction: every admissible pair inside [m] was already checked.
    pub fn restrict(&self, m: u64) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(Error::param(format!("cannot restrict [{}] to [{m}]", self.n)));
        }
        Coloring::new(m, self.r, self.assignment[..m as usize].to_vec())
    }

    /// Three-line text form: "N r", the N color ids, the constraint flags.
    pub fn to_text(&self, constraints: PatternConstraints) -> String {
        let colors: Vec<String> = self.assignment.iter().map(|c| c.to_string()).collect();
        format!(
            "{} {}\n{}\nmin_xy={} require_distinct={}\n",
            self.n,
            self.r,
            colors.join(" "),
            constraints.min_xy,
            constraints.require_distinct
        )
    }

    pub fn from_text(text: &str) -> Result<(Self, PatternConstraints)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::param("empty certificate"))?;
        let mut parts = header.split_whitespace();
        let n: u64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::param("bad N in certificate header"))?;
        let r: u32 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::param("bad r in certificate header"))?;
        let body = lines.next().ok_or_else(|| Error::param("missing color line"))?;
        let assignment: Vec<u32> = body
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::param(format!("bad color id '{t}'"))))
            .collect::<Result<_>>()?;
        let flags = lines.next().ok_or_else(|| Error::param("missing constraint line"))?;
        let mut constraints = PatternConstraints::default();
        for token in flags.split_whitespace() {
            match token.split_once('=') {
                Some(("min_xy", v)) => {
                    constraints.min_xy = v
                        .parse()
                        .map_err(|_| Error::param(format!("bad min_xy '{v}'")))?;
                }
                Some(("require_distinct", v)) => {
                    constraints.require_distinct = v
                        .parse()
                        .map_err(|_| Error::param(format!("bad require_distinct '{v}'")))?;
                }
                _ => return Err(Error::param(format!("unknown constraint token '{token}'"))),
            }
        }
        Ok((Coloring::new(n, r, assignment)?, constraints))
    }
}

/// Scans every pair x, y >= min_xy with x+y <= N and xy <= N and returns
/// the first admissible pair whose two pattern values share a color.
///
/// Deliberately a plain double loop over (x, y), independent of the
/// searcher's deduplicated edge list, so it can certify the searcher.
pub fn verify_coloring(c: &Coloring, constraints: PatternConstraints) -> Option<(u64, u64)> {
    let n = c.n;
    for x in constraints.min_xy..=n {
        if x + x > n {
            break;
        }
        for y in x..=n {
            let sum = x + y;
            if sum > n {
                break;
            }
            if y > n / x {
                break;
            }
            let product = x * y;
            if constraints.require_distinct && sum == product {
                continue;
            }
            if c.color_of(sum) == c.color_of(product) {
                return Some((x, y));
            }
        }
    }
    None
}

/// What a single-N search ended with.
#[derive(Debug, Clone, Serialize)]
pub enum SearchOutcome {
    /// A coloring of [N] with no monochromatic admissible pattern,
    /// proving M(r) > N.
    GoodColoring(Coloring),
    /// Every assignment ran into a monochromatic pattern, proving
    /// M(r) <= N; `leaves` counts the dead ends the search hit.
    Forced { leaves: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchCertificate {
    pub n: u64,
    pub r: u32,
    pub constraints: PatternConstraints,
    pub outcome: SearchOutcome,
    /// Backtracking nodes expanded (color placements tried).
    pub nodes: u64,
}

impl SearchCertificate {
    pub fn is_good(&self) -> bool {
        matches!(self.outcome, SearchOutcome::GoodColoring(_))
    }
}

struct Searcher {
    r: u32,
    adj: Vec<Vec<usize>>,
    colors: Vec<u32>,
    assigned: Vec<bool>,
    nodes: u64,
    leaves: u64,
    budget: u64,
}

impl Searcher {
    fn dfs(&mut self, i: usize) -> Result<bool> {
        if i == self.colors.len() {
            return Ok(true);
        }
        let mut extended = false;
        for c in 0..self.r {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::CostGuard {
                    what: "search nodes",
                    needed: self.nodes,
                    budget: self.budget,
                });
            }
            if self.adj[i]
                .iter()
                .any(|&j| self.assigned[j] && self.colors[j] == c)
            {
                continue;
            }
            self.colors[i] = c;
            self.assigned[i] = true;
            extended = true;
            if self.dfs(i + 1)? {
                return Ok(true);
            }
            self.assigned[i] = false;
        }
        if !extended {
            self.leaves += 1;
        }
        Ok(false)
    }
}

fn search_single(
    n: u64,
    r: u32,
    constraints: PatternConstraints,
    budget: u64,
) -> Result<SearchCertificate> {
    // Deduplicated pattern edges between values of [N].
    let mut edges = std::collections::BTreeSet::new();
    let mut self_loop = false;
    for x in constraints.min_xy..=n {
        if x + x > n {
            break;
        }
        for y in x..=n {
            if x + y > n || y > n / x {
                break;
            }
            let (sum, product) = (x + y, x * y);
            if sum == product {
                if !constraints.require_distinct {
                    self_loop = true;
                }
                continue;
            }
            edges.insert((sum.min(product), sum.max(product)));
        }
    }
    if self_loop {
        // Some admissible pattern is a singleton {v}: monochromatic in
        // every coloring, so nothing to search.
        return Ok(SearchCertificate {
            n,
            r,
            constraints,
            outcome: SearchOutcome::Forced { leaves: 0 },
            nodes: 0,
        });
    }

    // Index the constrained values.
    let mut values: Vec<u64> = edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect();
    values.sort_unstable();
    values.dedup();
    let index: std::collections::BTreeMap<u64, usize> =
        values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![Vec::new(); values.len()];
    for &(a, b) in &edges {
        let (i, j) = (index[&a], index[&b]);
        adj[i].push(j);
        adj[j].push(i);
    }

    let mut searcher = Searcher {
        r,
        adj,
        colors: vec![0; values.len()],
        assigned: vec![false; values.len()],
        nodes: 0,
        leaves: 0,
        budget,
    };
    // Symmetry: the smallest constrained value may as well be color 0.
    let start = if values.is_empty() {
        0
    } else {
        searcher.assigned[0] = true;
        1
    };
    let found = searcher.dfs(start)?;

    let outcome = if found {
        let mut assignment = vec![0u32; n as usize];
        for (&v, &i) in &index {
            assignment[(v - 1) as usize] = searcher.colors[i];
        }
        let coloring = Coloring::new(n, r, assignment)?;
        assert!(
            verify_coloring(&coloring, constraints).is_none(),
            "searcher emitted a coloring the verifier rejects"
        );
        SearchOutcome::GoodColoring(coloring)
    } else {
        SearchOutcome::Forced { leaves: searcher.leaves }
    };
    Ok(SearchCertificate {
        n,
        r,
        constraints,
        outcome,
        nodes: searcher.nodes,
    })
}

/// One certificate per N in [n_start, n_limit]: either a verified good
/// coloring (M(r) > N) or exhaustion (M(r) <= N).
pub fn search_threshold(
    r: u32,
    n_start: u64,
    n_limit: u64,
    constraints: PatternConstraints,
    budget: u64,
) -> Result<Vec<SearchCertificate>> {
    if r == 0 {
        return Err(Error::param("need at least one color"));
    }
    if n_start == 0 || n_start > n_limit {
        return Err(Error::param(format!("bad range [{n_start}, {n_limit}]")));
    }
    (n_start..=n_limit)
        .map(|n| search_single(n, r, constraints, budget))
        .collect()
}

/// Lower-bound run: push N upward until the first exhaustion.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub r: u32,
    pub constraints: PatternConstraints,
    /// Largest N with a certified good coloring.
    pub best_n: u64,
    pub coloring: Option<Coloring>,
    /// First N proved forced, i.e. M(r), if the search got that far.
    pub forced_at: Option<u64>,
    /// True when the node budget ran out before a forced N was found;
    /// best_n is then only best-so-far.
    pub budget_exhausted: bool,
}

/// Walks N = 1, 2, ... until a search exhausts (yielding M(r) = N and the
/// certified lower bound N-1) or the per-N node budget trips, in which
/// case the best coloring so far is returned flagged.
pub fn mr_lower_bound(
    r: u32,
    constraints: PatternConstraints,
    budget: u64,
) -> Result<LowerBoundReport> {
    if r == 0 {
        return Err(Error::param("need at least one color"));
    }
    let mut best_n = 0u64;
    let mut coloring = None;
    let mut n = 1u64;
    loop {
        match search_single(n, r, constraints, budget) {
            Ok(cert) => match cert.outcome {
                SearchOutcome::GoodColoring(c) => {
                    best_n = n;
                    coloring = Some(c);
                    n += 1;
                }
                SearchOutcome::Forced { .. } => {
                    return Ok(LowerBoundReport {
                        r,
                        constraints,
                        best_n,
                        coloring,
                        forced_at: Some(n),
                        budget_exhausted: false,
                    });
                }
            },
            Err(Error::CostGuard { .. }) => {
                return Ok(LowerBoundReport {
                    r,
                    constraints,
                    best_n,
                    coloring,
                    forced_at: None,
                    budget_exhausted: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
}
