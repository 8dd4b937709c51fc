//! Regions of interest: connected components with padded boxes, merged
//! wherever padded boxes overlap.

use serde::{Deserialize, Serialize};

use super::segment::{BBox, FeatureMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub id: usize,
    /// (bias index, freq index), sorted.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
}

/// A merged box and the pixels it holds.
type Group = (BBox, Vec<(usize, usize)>);

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

pub fn extract_rois(mask: &FeatureMask, pad_px: usize) -> Vec<Roi> {
    let (nb, nf) = (mask.n_bias, mask.n_freq);
    let mut groups: Vec<Group> = mask
        .components
        .iter()
        .map(|c| (c.bbox.padded(pad_px, nb, nf), c.pixels.clone()))
        .collect();
    // A merge grows a box, which can create new overlaps; repeat until stable.
    loop {
        let n = groups.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut merged = false;
        for a in 0..n {
            for b in a + 1..n {
                if groups[a].0.overlaps(&groups[b].0) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[rb.max(ra)] = ra.min(rb);
                        merged = true;
                    }
                }
            }
        }
        if !merged {
            break;
        }
        let mut next: Vec<Option<Group>> = vec![None; n];
        for (i, (bbox, px)) in groups.into_iter().enumerate() {
            let r = find(&mut parent, i);
            match &mut next[r] {
                Some((bb, pp)) => {
                    *bb = bb.union(&bbox);
                    pp.extend(px);
                }
                slot => *slot = Some((bbox, px)),
            }
        }
        groups = next.into_iter().flatten().collect();
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(id, (bbox, mut pixels))| {
            pixels.sort_unstable();
            Roi { id, pixels, bbox }
        })
        .collect()
}

/// ROIs from explicit boxes: each box collects the mask pixels it covers.
pub fn rois_from_boxes(mask: &FeatureMask, boxes: &[BBox]) -> Vec<Roi> {
    boxes
        .iter()
        .enumerate()
        .map(|(id, b)| {
            let b = BBox {
                bias0: b.bias0.min(mask.n_bias - 1),
                bias1: b.bias1.min(mask.n_bias - 1),
                freq0: b.freq0.min(mask.n_freq - 1),
                freq1: b.freq1.min(mask.n_freq - 1),
            };
            let mut pixels = Vec::new();
            for i in b.bias0..=b.bias1 {
                for j in b.freq0..=b.freq1 {
                    if mask.mask[i * mask.n_freq + j] {
                        pixels.push((i, j));
                    }
                }
            }
            Roi { id, pixels, bbox: b }
        })
        .collect()
}
