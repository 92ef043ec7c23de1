use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{style_distance, GramSet, StyleError, TripletConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: u32,
    pub positive: u32,
    pub negative: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    pub config: TripletConfig,
}

/// First line of a triplet file: the mining config plus provenance of the
/// features the distances came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletFileHeader {
    #[serde(flatten)]
    pub config: TripletConfig,
    pub extractor: String,
    pub images: usize,
    pub count: usize,
}

impl TripletSet {
    /// Writes a header line followed by one `{anchor, positive, negative}`
    /// object per line.
    pub fn write_jsonl<W: Write>(
        &self,
        extractor: &str,
        images: usize,
        mut w: W,
    ) -> Result<(), StyleError> {
        let header = TripletFileHeader {
            config: self.config,
            extractor: extractor.to_string(),
            images,
            count: self.triplets.len(),
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for t in &self.triplets {
            serde_json::to_writer(&mut w, t).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<(TripletFileHeader, TripletSet), StyleError> {
        let mut header: Option<TripletFileHeader> = None;
        let mut triplets = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| StyleError::TripletFile {
                line: i + 1,
                reason: e.to_string(),
            };
            match header {
                None => header = Some(serde_json::from_str(&line).map_err(bad)?),
                Some(_) => triplets.push(serde_json::from_str(&line).map_err(bad)?),
            }
        }
        let header = header.ok_or(StyleError::TripletFile {
            line: 0,
            reason: "empty file".into(),
        })?;
        if header.count != triplets.len() {
            return Err(StyleError::TripletFile {
                line: 0,
                reason: format!(
                    "header says {} triplets, found {}",
                    header.count,
                    triplets.len()
                ),
            });
        }
        let set = TripletSet {
            triplets,
            config: header.config,
        };
        Ok((header, set))
    }
}

/// Indices of the `k` nearest and `k` furthest images for one anchor,
/// nearest-first and furthest-first respectively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborPools {
    pub closest: Vec<usize>,
    pub furthest: Vec<usize>,
}

/// Full pairwise style-distance matrix. Rows are computed in parallel; each
/// entry is a single sequential sum, so the result is bit-identical for any
/// thread count and `d[i][j] == d[j][i]` exactly.
pub fn distance_matrix(grams: &[GramSet]) -> Result<Vec<Vec<f64>>, StyleError> {
    (0..grams.len())
        .into_par_iter()
        .map(|i| {
            (0..grams.len())
                .map(|j| {
                    if i == j {
                        Ok(0.0)
                    } else {
                        style_distance(&grams[i], &grams[j])
                    }
                })
                .collect()
        })
        .collect()
}

/// Ranks every other image by `(distance, index)` and takes both ends.
pub fn neighbor_pools(dist: &[Vec<f64>], anchor: usize, k: usize) -> NeighborPools {
    let mut others: Vec<usize> = (0..dist.len()).filter(|&j| j != anchor).collect();
    others.sort_by(|&a, &b| dist[anchor][a].total_cmp(&dist[anchor][b]).then(a.cmp(&b)));
    let k = k.min(others.len());
    NeighborPools {
        closest: others[..k].to_vec(),
        furthest: others[others.len() - k..].iter().rev().copied().collect(),
    }
}

/// For every anchor, samples `n_per_anchor` positives from its `k` closest
/// images and negatives from its `k` furthest. When the pools overlap the
/// negative is drawn from the pool minus the chosen positive, if possible.
pub fn mine_triplets(
    ids: &[u32],
    grams: &[GramSet],
    cfg: &TripletConfig,
) -> Result<TripletSet, StyleError> {
    cfg.validate()?;
    assert_eq!(ids.len(), grams.len(), "one id per Gram set");
    if grams.len() < cfg.k + 1 {
        return Err(StyleError::TooFewImages {
            needed: cfg.k + 1,
            got: grams.len(),
        });
    }
    let dist = distance_matrix(grams)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut triplets = Vec::with_capacity(grams.len() * cfg.n_per_anchor);
    for anchor in 0..grams.len() {
        let pools = neighbor_pools(&dist, anchor, cfg.k);
        for _ in 0..cfg.n_per_anchor {
            let positive = pools.closest[rng.random_range(0..pools.closest.len())];
            let candidates: Vec<usize> = pools
                .furthest
                .iter()
                .copied()
                .filter(|&n| n != positive)
                .collect();
            let negative = if candidates.is_empty() {
                positive
            } else {
                candidates[rng.random_range(0..candidates.len())]
            };
            triplets.push(Triplet {
                anchor: ids[anchor],
                positive: ids[positive],
                negative: ids[negative],
            });
        }
    }
    Ok(TripletSet {
        triplets,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::Gram;

    fn scalar(v: f64) -> GramSet {
        GramSet {
            layers: vec![Gram {
                dim: 1,
                data: vec![v],
            }],
        }
    }

    #[test]
    fn forced_ordering() {
        // d(0,1) = 1, d(0,2) = 9
        let grams = [scalar(0.0), scalar(1.0), scalar(3.0)];
        let cfg = TripletConfig {
            k: 1,
            n_per_anchor: 5,
            ..Default::default()
        };
        let set = mine_triplets(&[0, 1, 2], &grams, &cfg).unwrap();
        let anchor0: Vec<_> = set.triplets.iter().filter(|t| t.anchor == 0).collect();
        assert_eq!(anchor0.len(), 5);
        for t in anchor0 {
            assert_eq!((t.anchor, t.positive, t.negative), (0, 1, 2));
        }
    }

    #[test]
    fn degenerate_k_gives_identical_pools() {
        let grams: Vec<_> = (0..5).map(|i| scalar(i as f64 * 1.7)).collect();
        let dist = distance_matrix(&grams).unwrap();
        for a in 0..5 {
            let pools = neighbor_pools(&dist, a, 4);
            let mut c = pools.closest.clone();
            let mut f = pools.furthest.clone();
            c.sort();
            f.sort();
            assert_eq!(c, f);
        }
        let set = mine_triplets(
            &[10, 11, 12, 13, 14],
            &grams,
            &TripletConfig {
                k: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for t in &set.triplets {
            assert!(t.anchor != t.positive && t.anchor != t.negative && t.positive != t.negative);
        }
    }

    #[test]
    fn too_few_images() {
        let err = mine_triplets(
            &[0, 1],
            &[scalar(0.0), scalar(1.0)],
            &TripletConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            StyleError::TooFewImages { needed: 11, got: 2 }
        ));
        assert!(err.to_string().contains("lower k"));
    }

    #[test]
    fn jsonl_round_trip() {
        let grams: Vec<_> = (0..4).map(|i| scalar(i as f64)).collect();
        let cfg = TripletConfig {
            k: 2,
            n_per_anchor: 2,
            ..Default::default()
        };
        let set = mine_triplets(&[5, 6, 7, 8], &grams, &cfg).unwrap();
        let mut out = Vec::new();
        set.write_jsonl("filterbank:0", 4, &mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains("\"k\":2") && first.contains("\"extractor\":\"filterbank:0\""));
        assert_eq!(text.lines().count(), 1 + 8);
        let (header, back) = TripletSet::read_jsonl(out.as_slice()).unwrap();
        assert_eq!((header.images, header.count), (4, 8));
        assert_eq!(back, set);
        let truncated = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(TripletSet::read_jsonl(truncated.as_bytes()).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let grams: Vec<_> = (0..12).map(|i| scalar((i * i) as f64 * 0.1)).collect();
        let ids: Vec<u32> = (0..12).collect();
        let cfg = TripletConfig {
            k: 3,
            seed: 9,
            ..Default::default()
        };
        let a = mine_triplets(&ids, &grams, &cfg).unwrap();
        let b = mine_triplets(&ids, &grams, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.triplets.len(), 12 * cfg.n_per_anchor);
        let c = mine_triplets(&ids, &grams, &TripletConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }
}
