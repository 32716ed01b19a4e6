//! The weighted association matrix over `m` image blocks followed by `n`
//! text tokens.
//!
//! Every diagonal entry is 1. Off the diagonal, image pairs stay 0, an
//! image/text pair carries the state cosine only when the text token is an
//! aspect token, and a text pair carries the cosine only when the tokens are
//! within `threshold` dependency hops.

use super::{constant, AedError};
use crate::numerics::{Graph, Matrix, NodeId};

/// Which off-diagonal entries carry a cosine; the diagonal is fixed at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationMask {
    m: usize,
    n: usize,
    /// 1 where the entry is the state cosine, 0 elsewhere; zero diagonal.
    weights: Matrix,
}

impl AssociationMask {
    pub fn size(&self) -> usize {
        self.m + self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        i == j || self.weights[(i, j)] != 0.0
    }
}

/// Symmetric (m+n)×(m+n) matrix; rows `0..m` are image blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationMatrix {
    m: usize,
    entries: Matrix,
}

impl AssociationMatrix {
    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }
}

pub fn association_mask(
    dep_dist: &[Vec<u32>],
    aspect_tokens: &[usize],
    m: usize,
    n: usize,
    threshold: u32,
) -> Result<AssociationMask, AedError> {
    if dep_dist.len() != n || dep_dist.iter().any(|r| r.len() != n) {
        return Err(AedError::Contract(format!("dep_dist must be {n}×{n}")));
    }
    if let Some(&a) = aspect_tokens.iter().find(|&&a| a >= n) {
        return Err(AedError::Contract(format!("aspect token {a} outside {n} text tokens")));
    }
    let size = m + n;
    let mut weights = Matrix::zeros(size, size);
    for &a in aspect_tokens {
        for img in 0..m {
            weights[(m + a, img)] = 1.0;
            weights[(img, m + a)] = 1.0;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && dep_dist[i][j] <= threshold {
                weights[(m + i, m + j)] = 1.0;
            }
        }
    }
    Ok(AssociationMask { m, n, weights })
}

/// Records `A = cos(Ĥ) ⊙ mask + I` on the tape.
pub fn association_graph(g: &mut Graph, h_hat: NodeId, mask: &AssociationMask) -> Result<NodeId, AedError> {
    let rows = g.value(h_hat).rows();
    if rows != mask.size() {
        return Err(AedError::Contract(format!("{rows} states for an association matrix of size {}", mask.size())));
    }
    let unit = g.row_normalize(h_hat);
    let unit_t = g.transpose(unit);
    let cos = g.matmul(unit, unit_t)?;
    let w = g.constant(mask.weights.clone());
    let masked = g.mul(cos, w)?;
    let eye = g.constant(Matrix::identity(rows));
    Ok(g.add(masked, eye)?)
}

pub fn build_association_matrix(
    h_hat: &Matrix,
    dep_dist: &[Vec<u32>],
    aspect_tokens: &[usize],
    m: usize,
    n: usize,
    threshold: u32,
) -> Result<AssociationMatrix, AedError> {
    if h_hat.rows() != m + n {
        return Err(AedError::Contract(format!("{} states for {m} image and {n} text positions", h_hat.rows())));
    }
    let mask = association_mask(dep_dist, aspect_tokens, m, n, threshold)?;
    let mut g = Graph::new();
    let h = constant(&mut g, h_hat);
    let a = association_graph(&mut g, h, &mask)?;
    let entries = g.value(a).map(|v| v.clamp(-1.0, 1.0));
    Ok(AssociationMatrix { m, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cosine;
    use proptest::prelude::*;

    fn path_dist(n: usize) -> Vec<Vec<u32>> {
        (0..n).map(|i| (0..n).map(|j| i.abs_diff(j) as u32).collect()).collect()
    }

    #[test]
    fn far_tokens_without_aspects_only_keep_the_diagonal() {
        let n = 3;
        let dist = vec![vec![0, 3, 4], vec![3, 0, 5], vec![4, 5, 0]];
        let h = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![1.0, 2.0], vec![-1.0, 3.0]]).unwrap();
        let a = build_association_matrix(&h, &dist, &[], 1, n, 2).unwrap();
        assert_eq!(a.entries(), &Matrix::identity(4));
    }

    #[test]
    fn aspect_token_links_to_the_image() {
        // m = 1, n = 2; image state [3,4], token 0 state [4,3]: cosine 24/25.
        let h = Matrix::from_rows(&[vec![3.0, 4.0], vec![4.0, 3.0], vec![0.0, 1.0]]).unwrap();
        let dist = vec![vec![0, 5], vec![5, 0]];
        let a = build_association_matrix(&h, &dist, &[0], 1, 2, 2).unwrap();
        let e = a.entries();
        assert!((e[(1, 0)] - 0.96).abs() < 1e-12);
        assert_eq!(e[(0, 1)], e[(1, 0)]);
        assert_eq!(e[(2, 0)], 0.0);
        assert_eq!(e[(1, 2)], 0.0);
    }

    #[test]
    fn image_block_is_identity() {
        let h = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.1], vec![0.9, 0.0], vec![2.0, 2.0]]).unwrap();
        let a = build_association_matrix(&h, &[vec![0]], &[0], 3, 1, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.entries()[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn aspect_out_of_range_is_rejected() {
        let h = Matrix::zeros(3, 2);
        assert!(matches!(
            build_association_matrix(&h, &path_dist(2), &[2], 1, 2, 2),
            Err(AedError::Contract(_))
        ));
    }

    fn states(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
    }

    proptest! {
        #[test]
        fn entries_agree_with_direct_cosine(
            h in states(7, 3),
            aspects in prop::collection::btree_set(0usize..4, 0..3),
        ) {
            let (m, n) = (3, 4);
            let aspects: Vec<usize> = aspects.into_iter().collect();
            let dist = path_dist(n);
            let a = build_association_matrix(&h, &dist, &aspects, m, n, 2).unwrap();
            let e = a.entries();
            for i in 0..m + n {
                for j in 0..m + n {
                    prop_assert!((e[(i, j)] - e[(j, i)]).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&e[(i, j)]));
                    let linked = if i == j {
                        true
                    } else if i < m && j < m {
                        false
                    } else if i < m || j < m {
                        aspects.contains(&(i.max(j) - m))
                    } else {
                        dist[i - m][j - m] <= 2
                    };
                    if i == j {
                        prop_assert_eq!(e[(i, j)], 1.0);
                    } else if linked {
                        let c = cosine(h.row(i), h.row(j)).unwrap();
                        prop_assert!((e[(i, j)] - c).abs() < 1e-12);
                    } else {
                        prop_assert_eq!(e[(i, j)], 0.0);
                    }
                }
            }
        }

        #[test]
        fn far_pairs_ignore_their_states(h in states(5, 2), other in states(5, 2)) {
            // Tokens 0 and 3 on a 4-token path are 3 hops apart.
            let (m, n) = (1, 4);
            let dist = path_dist(n);
            let mut moved = h.clone();
            for j in 0..2 {
                moved[(1, j)] = other[(1, j)];
                moved[(4, j)] = other[(4, j)];
            }
            let a = build_association_matrix(&h, &dist, &[1], m, n, 2).unwrap();
            let b = build_association_matrix(&moved, &dist, &[1], m, n, 2).unwrap();
            prop_assert_eq!(a.entries()[(1, 4)], 0.0);
            prop_assert_eq!(b.entries()[(1, 4)], 0.0);
        }
    }
}
