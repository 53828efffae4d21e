//! Swimmer images: a rectangular torso with four limbs, each limb in one of
//! four poses, for 4^4 = 256 binary images and 17 disjoint parts.
//!
//! Images are rows and pixels are columns, so the row-orthogonal `V` of an
//! ONMF clusters pixels and each row of `V` can cover one part.
//!
//! Layout for limb length `L`: the torso occupies `2L + 2` rows and 2
//! columns. Arms hang off the two top corners, legs off the two bottom
//! corners, each pose being a straight ray of `L` pixels away from the
//! corner. Arms point W/NW/N/SW (left) and E/NE/N/SE (right); legs point
//! W/SW/S/NW and E/SE/S/NE. The torso height keeps the diagonal rays of an
//! arm and a leg on the same side apart.

use ndarray::Array2;

use crate::error::{OnmfError, Result};
use crate::linalg::DataMatrix;

pub const SWIMMER_IMAGES: usize = 256;
pub const SWIMMER_PARTS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwimmerParams {
    /// Frames are `image_side x image_side` pixels.
    pub image_side: usize,
    pub limb_length: usize,
}

impl Default for SwimmerParams {
    fn default() -> Self {
        Self {
            image_side: 32,
            limb_length: 6,
        }
    }
}

impl SwimmerParams {
    fn check(&self) -> Result<()> {
        let l = self.limb_length;
        if l == 0 {
            return Err(OnmfError::Geometry("limb_length must be >= 1".into()));
        }
        let need = 4 * l + 2;
        if self.image_side < need {
            return Err(OnmfError::Geometry(format!(
                "limb_length {l} needs frames of at least {need} pixels, got {}",
                self.image_side
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Swimmer {
    /// `256 x image_side^2`, binary.
    pub matrix: DataMatrix,
    /// Pixel indices (row-major) of each part: the torso first, then limb
    /// `l` pose `p` at `1 + 4l + p`.
    pub parts: Vec<Vec<usize>>,
    /// `poses[i][l]` is the pose of limb `l` in image `i`.
    pub poses: Vec<[usize; 4]>,
}

impl Swimmer {
    /// Parts shown in image `i`.
    pub fn parts_of_image(&self, i: usize) -> [usize; 5] {
        let p = self.poses[i];
        [0, 1 + p[0], 5 + p[1], 9 + p[2], 13 + p[3]]
    }

    /// Part index per pixel, `None` for pixels that are never active.
    pub fn pixel_labels(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.matrix.ncols()];
        for (i, part) in self.parts.iter().enumerate() {
            for &px in part {
                out[px] = Some(i);
            }
        }
        out
    }
}

pub fn generate_swimmer(p: &SwimmerParams) -> Result<Swimmer> {
    p.check()?;
    let side = p.image_side as isize;
    let l = p.limb_length as isize;
    let r0 = (side - (4 * l + 2)) / 2 + l;
    let r1 = r0 + 2 * l + 1;
    let c0 = (side - (2 * l + 2)) / 2 + l;
    let c1 = c0 + 1;
    let px = |r: isize, c: isize| (r * side + c) as usize;

    let mut parts = Vec::with_capacity(SWIMMER_PARTS);
    parts.push(
        (r0..=r1)
            .flat_map(|r| (c0..=c1).map(move |c| (r, c)))
            .map(|(r, c)| px(r, c))
            .collect::<Vec<_>>(),
    );
    let limbs: [((isize, isize), [(isize, isize); 4]); 4] = [
        ((r0, c0), [(0, -1), (-1, -1), (-1, 0), (1, -1)]),
        ((r0, c1), [(0, 1), (-1, 1), (-1, 0), (1, 1)]),
        ((r1, c0), [(0, -1), (1, -1), (1, 0), (-1, -1)]),
        ((r1, c1), [(0, 1), (1, 1), (1, 0), (-1, 1)]),
    ];
    for ((ar, ac), dirs) in limbs {
        for (dr, dc) in dirs {
            parts.push((1..=l).map(|s| px(ar + s * dr, ac + s * dc)).collect());
        }
    }

    let mut owner = vec![usize::MAX; (side * side) as usize];
    for (i, part) in parts.iter().enumerate() {
        for &q in part {
            if owner[q] != usize::MAX {
                return Err(OnmfError::Geometry(format!("parts {} and {i} overlap at pixel {q}", owner[q])));
            }
            owner[q] = i;
        }
    }

    let mut poses = Vec::with_capacity(SWIMMER_IMAGES);
    for code in 0..SWIMMER_IMAGES {
        poses.push([code / 64, (code / 16) % 4, (code / 4) % 4, code % 4]);
    }
    let mut a = Array2::zeros((SWIMMER_IMAGES, (side * side) as usize));
    for (i, pose) in poses.iter().enumerate() {
        let shown = [0, 1 + pose[0], 5 + pose[1], 9 + pose[2], 13 + pose[3]];
        for part in shown {
            for &q in &parts[part] {
                a[[i, q]] = 1.0;
            }
        }
    }
    Ok(Swimmer {
        matrix: DataMatrix::dense(a)?,
        parts,
        poses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn rows_are_distinct() {
        let s = generate_swimmer(&SwimmerParams::default()).unwrap();
        let a = s.matrix.to_dense();
        let rows: HashSet<Vec<u64>> = a.rows().into_iter().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
        assert_eq!(rows.len(), SWIMMER_IMAGES);
    }

    #[test]
    fn pose_frequencies() {
        let s = generate_swimmer(&SwimmerParams::default()).unwrap();
        let a = s.matrix.to_dense();
        for (i, part) in s.parts.iter().enumerate() {
            let q = part[0];
            let count = a.column(q).iter().filter(|&&x| x == 1.0).count();
            assert_eq!(count, if i == 0 { 256 } else { 64 }, "part {i}");
        }
    }

    #[test]
    fn images_are_unions_of_their_parts() {
        let s = generate_swimmer(&SwimmerParams::default()).unwrap();
        let a = s.matrix.to_dense();
        for i in 0..SWIMMER_IMAGES {
            let mut expect = HashSet::new();
            for part in s.parts_of_image(i) {
                expect.extend(s.parts[part].iter().copied());
            }
            let got: HashSet<usize> = a.row(i).iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(j, _)| j).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn smallest_frame_and_longer_limbs() {
        for l in 1..=7 {
            let s = generate_swimmer(&SwimmerParams {
                image_side: 4 * l + 2,
                limb_length: l,
            })
            .unwrap();
            assert_eq!(s.parts.len(), SWIMMER_PARTS);
        }
    }

    #[test]
    fn bad_geometry() {
        let small = SwimmerParams {
            image_side: 10,
            limb_length: 6,
        };
        assert!(matches!(generate_swimmer(&small), Err(OnmfError::Geometry(_))));
        let zero = SwimmerParams {
            image_side: 32,
            limb_length: 0,
        };
        assert!(generate_swimmer(&zero).is_err());
    }
}
