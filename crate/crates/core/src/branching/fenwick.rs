/// Binary indexed tree over non-negative counts that can grow at the end.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fenwick {
    // 1-based internally: tree[k - 1] covers (k - lowbit(k), k]
    tree: Vec<u64>,
    values: Vec<u64>,
}

fn lowbit(k: usize) -> usize {
    k & k.wrapping_neg()
}

impl Fenwick {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> u64 {
        self.values[i]
    }

    /// Sum of the first `k` values.
    pub fn prefix(&self, mut k: usize) -> u64 {
        let mut s = 0;
        while k > 0 {
            s += self.tree[k - 1];
            k -= lowbit(k);
        }
        s
    }

    /// Appends a slot holding `v`.
    pub fn push(&mut self, v: u64) {
        let k = self.values.len() + 1;
        let covered = self.prefix(k - 1) - self.prefix(k - lowbit(k));
        self.values.push(v);
        self.tree.push(covered + v);
    }

    pub fn add(&mut self, i: usize, v: u64) {
        self.values[i] += v;
        let mut k = i + 1;
        while k <= self.tree.len() {
            self.tree[k - 1] += v;
            k += lowbit(k);
        }
    }

    pub fn sub(&mut self, i: usize, v: u64) {
        self.values[i] -= v;
        let mut k = i + 1;
        while k <= self.tree.len() {
            self.tree[k - 1] -= v;
            k += lowbit(k);
        }
    }

    /// Smallest index `i` with `prefix(i + 1) > r`.
    pub fn find(&self, mut r: u64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut step = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= r {
                pos = next;
                r -= self.tree[next - 1];
            }
            step >>= 1;
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_prefix_sums() {
        let mut f = Fenwick::default();
        let vals = [3u64, 0, 5, 1, 0, 2, 7, 4, 0, 6, 1];
        for &v in &vals {
            f.push(v);
        }
        f.add(1, 2);
        f.sub(6, 3);
        let mut naive = vals.to_vec();
        naive[1] += 2;
        naive[6] -= 3;
        for k in 0..=naive.len() {
            assert_eq!(f.prefix(k), naive[..k].iter().sum::<u64>());
        }
        let total: u64 = naive.iter().sum();
        for r in 0..total {
            let i = f.find(r);
            assert!(naive[..i].iter().sum::<u64>() <= r);
            assert!(naive[..=i].iter().sum::<u64>() > r);
        }
    }
}
