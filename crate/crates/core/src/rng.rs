//! Deterministic seeded randomness.
//!
//! Every stochastic component draws from an [`RngStream`] derived from the
//! master seed and a list of integer labels (agent, round, iteration, ...).
//! Streams are independent by construction and the generator is fixed
//! (xoshiro256**), so runs are bit-identical across platforms and worker
//! schedules.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix_next(x: &mut u64) -> u64 {
    *x = x.wrapping_add(GOLDEN);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    s: [u64; 4],
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        let mut x = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix_next(&mut x);
        }
        // xoshiro state must not be all-zero; splitmix cannot produce that
        // from any seed, but keep the guard explicit.
        if s == [0, 0, 0, 0] {
            s[0] = GOLDEN;
        }
        Self { s }
    }

    /// Derives an independent stream from a master seed and a label path.
    pub fn derive(master: u64, labels: &[u64]) -> Self {
        let mut x = master;
        for &label in labels {
            let mut t = x ^ label.wrapping_mul(0xa24b_aed4_963e_e407);
            x = splitmix_next(&mut t);
        }
        Self::from_seed(x)
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn gen_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Samples an index from an (approximately normalized) probability row.
    pub fn sample_categorical(&mut self, probs: &[f64]) -> usize {
        let r = self.next_f64();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
            }
            cum += p;
            if r < cum {
                return i;
            }
        }
        last_positive
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.gen_range(i + 1);
            xs.swap(i, j);
        }
    }

    /// K distinct indices drawn uniformly from 0..n, returned sorted.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.gen_range(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
