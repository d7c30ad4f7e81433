//! Request streams: the moving fitness landscape.
//!
//! Each sector holds an archetype genome. Every epoch a member habitat receives
//! a noisy copy of the archetype as its request, and the archetype itself
//! drifts slowly.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{Genome, GenomeSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequestError {
    #[error("habitat {habitat} is not a member of sector {sector}")]
    NotAMember { habitat: usize, sector: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub target: Genome,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorProfile {
    pub id: usize,
    pub archetype: Genome,
    pub members: BTreeSet<usize>,
    pub noise_rate: f64,
    pub drift_rate: f64,
}

impl SectorProfile {
    /// Draws the request `habitat` sees at `epoch`. The caller supplies the
    /// stream derived for that `(habitat, epoch)` pair.
    pub fn next_request<R: Rng + ?Sized>(
        &self,
        habitat: usize,
        epoch: u64,
        spec: &GenomeSpec,
        rng: &mut R,
    ) -> Result<Request, RequestError> {
        if !self.members.contains(&habitat) {
            return Err(RequestError::NotAMember {
                habitat,
                sector: self.id,
            });
        }
        let mut symbols = self.archetype.symbols().to_vec();
        spec.resample_each(&mut symbols, self.noise_rate, rng);
        Ok(Request {
            target: Genome::from_raw(symbols),
            epoch,
        })
    }

    /// Moves the archetype one epoch forward.
    pub fn drift<R: Rng + ?Sized>(&mut self, spec: &GenomeSpec, rng: &mut R) {
        if self.drift_rate <= 0.0 {
            return;
        }
        let mut symbols = self.archetype.symbols().to_vec();
        spec.resample_each(&mut symbols, self.drift_rate, rng);
        self.archetype = Genome::from_raw(symbols);
    }
}

/// Contiguous assignment of `n_habitats` to `sectors` blocks, as even as possible.
pub fn sector_of(habitat: usize, n_habitats: usize, sectors: usize) -> usize {
    habitat * sectors / n_habitats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::distance;
    use crate::rng::{self, Entity, Phase};

    fn spec(alphabet: u32) -> GenomeSpec {
        GenomeSpec {
            alphabet,
            max_len: 64,
        }
    }

    fn sector(archetype: Vec<u32>, noise: f64, drift: f64) -> SectorProfile {
        SectorProfile {
            id: 0,
            archetype: Genome::from_raw(archetype),
            members: [0, 1, 2].into_iter().collect(),
            noise_rate: noise,
            drift_rate: drift,
        }
    }

    #[test]
    fn zero_noise_returns_the_archetype() {
        let s = sector(vec![3, 1, 4, 1, 5], 0.0, 0.0);
        let mut r = rng::seeded(1);
        let req = s.next_request(1, 9, &spec(16), &mut r).unwrap();
        assert_eq!(req.target, s.archetype);
        assert_eq!(req.epoch, 9);
    }

    #[test]
    fn full_noise_binary_alphabet_flips_everything() {
        let s = sector(vec![0, 1, 1, 0, 0], 1.0, 0.0);
        let req = s.next_request(0, 0, &spec(2), &mut rng::seeded(5)).unwrap();
        assert_eq!(req.target.symbols(), &[1, 0, 0, 1, 1]);
    }

    #[test]
    fn request_is_a_function_of_the_stream_key() {
        let s = sector(vec![0; 12], 0.3, 0.0);
        let draw = |h: usize, e: u64| {
            let mut r = rng::stream(11, Entity::Habitat, h as u64, e, Phase::Request);
            s.next_request(h, e, &spec(16), &mut r).unwrap()
        };
        assert_eq!(draw(2, 7), draw(2, 7));
        assert_ne!(draw(2, 7), draw(1, 7));
    }

    #[test]
    fn non_member_is_rejected() {
        let s = sector(vec![0; 4], 0.0, 0.0);
        assert_eq!(
            s.next_request(9, 0, &spec(16), &mut rng::seeded(0)),
            Err(RequestError::NotAMember {
                habitat: 9,
                sector: 0
            })
        );
    }

    #[test]
    fn drift_zero_is_static_and_full_drift_flips() {
        let mut s = sector(vec![0, 1, 0, 1], 0.0, 0.0);
        let before = s.archetype.clone();
        let mut r = rng::seeded(3);
        for _ in 0..50 {
            s.drift(&spec(2), &mut r);
        }
        assert_eq!(s.archetype, before);

        s.drift_rate = 1.0;
        s.drift(&spec(2), &mut r);
        assert_eq!(s.archetype.symbols(), &[1, 0, 1, 0]);
        s.drift(&spec(2), &mut r);
        assert_eq!(s.archetype, before);
    }

    #[test]
    fn drift_replay_is_identical() {
        let trajectory = || {
            let mut s = sector(vec![0; 12], 0.0, 0.2);
            let mut r = rng::seeded(77);
            (0..20)
                .map(|_| {
                    s.drift(&spec(16), &mut r);
                    s.archetype.clone()
                })
                .collect::<Vec<_>>()
        };
        let t = trajectory();
        assert_eq!(t, trajectory());
        assert!(t.iter().all(|g| g.len() == 12));
    }

    #[test]
    fn same_epoch_disagreement_is_bounded() {
        // Two independent noisy copies disagree per symbol with probability
        // 2q - q^2 * A/(A-1) <= 2q. Check the sample mean against 2q + 3 sigma.
        let noise = 0.05;
        let s = sector(vec![0; 12], noise, 0.0);
        let sp = spec(16);
        let mut r = rng::seeded(99);
        let draws = 10_000;
        let mut disagree = 0usize;
        for _ in 0..draws {
            let a = s.next_request(0, 0, &sp, &mut r).unwrap();
            let b = s.next_request(1, 0, &sp, &mut r).unwrap();
            disagree += a
                .target
                .symbols()
                .iter()
                .zip(b.target.symbols())
                .filter(|(x, y)| x != y)
                .count();
        }
        let trials = (draws * 12) as f64;
        let p = 2.0 * noise;
        let sigma = (p * (1.0 - p) / trials).sqrt();
        let observed = disagree as f64 / trials;
        assert!(observed <= p + 3.0 * sigma, "observed {observed}");
    }

    #[test]
    fn independent_sectors_are_far_apart() {
        let sp = spec(16);
        let mut r = rng::seeded(4);
        let draws = 1000;
        let mut total = 0.0;
        for _ in 0..draws {
            let a = sector(sp.random_genome(12, &mut r).into_symbols(), 0.05, 0.0);
            let b = sector(sp.random_genome(12, &mut r).into_symbols(), 0.05, 0.0);
            let ra = a.next_request(0, 0, &sp, &mut r).unwrap();
            let rb = b.next_request(0, 0, &sp, &mut r).unwrap();
            total += distance(&ra.target, &rb.target);
        }
        assert!(total / draws as f64 > 0.5);
    }

    #[test]
    fn contiguous_sector_assignment() {
        let got: Vec<usize> = (0..10).map(|h| sector_of(h, 10, 2)).collect();
        assert_eq!(got, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let uneven: Vec<usize> = (0..7).map(|h| sector_of(h, 7, 3)).collect();
        assert_eq!(uneven, vec![0, 0, 0, 1, 1, 2, 2]);
    }
}
