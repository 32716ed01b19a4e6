use std::collections::VecDeque;
use std::fmt;

use super::MultimodalSample;

/// One broken sample invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoTokens,
    NoImageBlocks,
    LengthMismatch { field: &'static str, expected: usize, found: usize },
    RaggedImageBlocks { block: usize, expected: usize, found: usize },
    EmbedDimMismatch { text: usize, image: usize },
    NonFinite { field: &'static str, index: usize },
    DepDistNotSquare { row: usize },
    DepDistAsymmetric { i: usize, j: usize },
    DepDistNonzeroDiagonal { i: usize },
    DepDistNotTree,
    SenticOutOfRange { token: usize, value: f64 },
    AspectOutOfRange { aspect: usize, begin: usize, end: usize },
    AspectsOverlap { aspect: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTokens => write!(f, "sample has no tokens"),
            Violation::NoImageBlocks => write!(f, "sample has no image blocks"),
            Violation::LengthMismatch { field, expected, found } => {
                write!(f, "{field} has length {found}, expected {expected}")
            }
            Violation::RaggedImageBlocks { block, expected, found } => {
                write!(f, "image block {block} has dimension {found}, expected {expected}")
            }
            Violation::EmbedDimMismatch { text, image } => {
                write!(f, "text_embed dimension {text} differs from image_embed dimension {image}")
            }
            Violation::NonFinite { field, index } => write!(f, "non-finite value in {field} at {index}"),
            Violation::DepDistNotSquare { row } => write!(f, "dep_dist row {row} has wrong length"),
            Violation::DepDistAsymmetric { i, j } => write!(f, "dep_dist not symmetric at ({i},{j})"),
            Violation::DepDistNonzeroDiagonal { i } => write!(f, "dep_dist diagonal nonzero at {i}"),
            Violation::DepDistNotTree => write!(f, "dep_dist is not the distance matrix of a tree"),
            Violation::SenticOutOfRange { token, value } => {
                write!(f, "sentic out of range at token {token} ({value})")
            }
            Violation::AspectOutOfRange { aspect, begin, end } => {
                write!(f, "aspect {aspect} span ({begin},{end}) invalid for the token count")
            }
            Violation::AspectsOverlap { aspect } => {
                write!(f, "aspect {aspect} overlaps or precedes the previous aspect")
            }
        }
    }
}

/// Checks every sample invariant and reports all violations found.
pub fn validate_sample(s: &MultimodalSample) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let n = s.n();
    if n == 0 {
        out.push(Violation::NoTokens);
    }
    if s.m() == 0 {
        out.push(Violation::NoImageBlocks);
    }
    for (field, len) in [("noun_flags", s.noun_flags.len()), ("sentic", s.sentic.len()), ("dep_dist", s.dep_dist.len())] {
        if len != n {
            out.push(Violation::LengthMismatch { field, expected: n, found: len });
        }
    }

    let d_img = s.d_img();
    if s.m() > 0 && d_img == 0 {
        out.push(Violation::RaggedImageBlocks { block: 0, expected: 1, found: 0 });
    }
    for (b, block) in s.image_blocks.iter().enumerate() {
        if block.len() != d_img {
            out.push(Violation::RaggedImageBlocks { block: b, expected: d_img, found: block.len() });
        }
        if let Some(k) = block.iter().position(|v| !v.is_finite()) {
            out.push(Violation::NonFinite { field: "image_blocks", index: b * d_img + k });
        }
    }
    if s.text_embed.len() != s.image_embed.len() {
        out.push(Violation::EmbedDimMismatch { text: s.text_embed.len(), image: s.image_embed.len() });
    }
    for (field, values) in [("text_embed", &s.text_embed), ("image_embed", &s.image_embed)] {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            out.push(Violation::NonFinite { field, index: k });
        }
    }

    for (k, &v) in s.sentic.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::NonFinite { field: "sentic", index: k });
        } else if !(-1.0..=1.0).contains(&v) {
            out.push(Violation::SenticOutOfRange { token: k, value: v });
        }
    }

    let mut square = s.dep_dist.len() == n;
    for (i, row) in s.dep_dist.iter().enumerate() {
        if row.len() != s.dep_dist.len() {
            out.push(Violation::DepDistNotSquare { row: i });
            square = false;
        }
    }
    if square {
        let before = out.len();
        for i in 0..n {
            if s.dep_dist[i][i] != 0 {
                out.push(Violation::DepDistNonzeroDiagonal { i });
            }
            for j in i + 1..n {
                if s.dep_dist[i][j] != s.dep_dist[j][i] {
                    out.push(Violation::DepDistAsymmetric { i, j });
                }
            }
        }
        if out.len() == before && n > 0 && !is_tree_metric(&s.dep_dist) {
            out.push(Violation::DepDistNotTree);
        }
    }

    let mut prev_end: Option<usize> = None;
    for (k, a) in s.aspects.iter().enumerate() {
        if a.begin > a.end || a.end >= n {
            out.push(Violation::AspectOutOfRange { aspect: k, begin: a.begin, end: a.end });
            continue;
        }
        if prev_end.is_some_and(|e| a.begin <= e) {
            out.push(Violation::AspectsOverlap { aspect: k });
        }
        prev_end = Some(a.end);
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// True when the distance-1 pairs form a spanning tree whose path lengths
/// reproduce the matrix.
fn is_tree_metric(dist: &[Vec<u32>]) -> bool {
    let n = dist.len();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist[i][j] == 1).collect())
        .collect();
    let edges: usize = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
    if edges + 1 != n {
        return false;
    }
    (0..n).all(|src| {
        let mut seen = vec![u32::MAX; n];
        seen[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if seen[v] == u32::MAX {
                    seen[v] = seen[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        seen == dist[src]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::fixtures::sample;
    use crate::datamodel::{AspectAnnotation, Polarity};

    #[test]
    fn well_formed_sample_passes() {
        assert_eq!(validate_sample(&sample("a")), Ok(()));
    }

    #[test]
    fn asymmetric_distance_is_reported() {
        let mut s = sample("a");
        s.dep_dist[0][2] = 3;
        let v = validate_sample(&s).unwrap_err();
        assert!(v.iter().any(|x| x.to_string() == "dep_dist not symmetric at (0,2)"), "{v:?}");
    }

    #[test]
    fn sentic_out_of_range_is_reported() {
        let mut s = sample("a");
        s.sentic[2] = 1.5;
        let v = validate_sample(&s).unwrap_err();
        assert!(v[0].to_string().starts_with("sentic out of range at token 2"), "{v:?}");
    }

    #[test]
    fn all_violations_are_returned() {
        let mut s = sample("a");
        s.sentic[0] = -2.0;
        s.dep_dist[1][3] = 7;
        s.aspects.push(AspectAnnotation::new(3, 9, Polarity::Neutral));
        s.image_blocks[1].pop();
        let v = validate_sample(&s).unwrap_err();
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn non_tree_distances_are_reported() {
        let mut s = sample("a");
        // Symmetric and zero-diagonal but 0-3 claims distance 1 (a cycle).
        s.dep_dist[0][3] = 1;
        s.dep_dist[3][0] = 1;
        assert_eq!(validate_sample(&s), Err(vec![Violation::DepDistNotTree]));
    }

    #[test]
    fn overlapping_aspects_are_reported() {
        let mut s = sample("a");
        s.aspects = vec![
            AspectAnnotation::new(0, 1, Polarity::Neutral),
            AspectAnnotation::new(1, 2, Polarity::Neutral),
        ];
        assert_eq!(validate_sample(&s), Err(vec![Violation::AspectsOverlap { aspect: 1 }]));
    }
}
