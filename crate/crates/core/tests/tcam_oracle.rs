use std::collections::HashSet;

use amper::tcam::{
    frnn_query_width, prefix_mask, Lfsr32, TcamArray, TcamBank, TernaryWord, Urng, ROWS,
};
use proptest::prelude::*;

fn brute_match(stored_value: u64, stored_care: u64, q: &TernaryWord) -> bool {
    (0..q.width()).all(|i| {
        let s = if stored_care >> i & 1 == 0 {
            'x'
        } else if stored_value >> i & 1 == 1 {
            '1'
        } else {
            '0'
        };
        let c = q.symbol(i);
        s == 'x' || c == 'x' || s == c
    })
}

fn brute_distance(stored_value: u64, stored_care: u64, q: &TernaryWord) -> u32 {
    (0..q.width())
        .filter(|&i| {
            stored_care >> i & 1 == 1
                && q.care() >> i & 1 == 1
                && (stored_value ^ q.value()) >> i & 1 == 1
        })
        .count() as u32
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn array_sensing_matches_symbol_oracle(
        rows in proptest::collection::vec((any::<u64>(), any::<u64>(), any::<bool>()), ROWS),
        qv in any::<u64>(),
        qc in any::<u64>(),
        width in 1u32..=64,
    ) {
        let mut a = TcamArray::default();
        let m = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        for (r, &(v, c, valid)) in rows.iter().enumerate() {
            a.write(r, v, c & m);
            a.set_valid(r, valid);
        }
        let q = TernaryWord::new(width, qv, qc).unwrap();
        let mut expect = 0u64;
        let mut best: Option<(usize, u32)> = None;
        for (r, &(v, c, valid)) in rows.iter().enumerate() {
            if !valid {
                continue;
            }
            if brute_match(v & c & m, c & m, &q) {
                expect |= 1 << r;
            }
            let d = brute_distance(v & c & m, c & m, &q);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((r, d));
            }
        }
        prop_assert_eq!(a.search_exact(&q), expect);
        prop_assert_eq!(a.search_best(&q), best);
    }

    #[test]
    fn bank_sensing_matches_symbol_oracle(
        values in proptest::collection::vec(any::<u32>(), 1..300),
        qv in any::<u32>(),
        qc in any::<u32>(),
    ) {
        let mut bank = TcamBank::new(values.len(), 32).unwrap();
        for (s, &v) in values.iter().enumerate() {
            bank.write(s, v as u64).unwrap();
        }
        let q = TernaryWord::new(32, qv as u64, qc as u64).unwrap();
        let expect: Vec<usize> =
            (0..values.len()).filter(|&s| brute_match(values[s] as u64, u32::MAX as u64, &q)).collect();
        prop_assert_eq!(bank.search_exact(&q).unwrap(), expect);
        let best = (0..values.len())
            .map(|s| (brute_distance(values[s] as u64, u32::MAX as u64, &q), s))
            .min()
            .map(|(d, s)| (s, d))
            .unwrap();
        prop_assert_eq!(bank.search_best(&q).unwrap(), best);
    }
}

#[test]
fn exhaustive_eight_bit_queries() {
    let mut bank = TcamBank::new(256, 8).unwrap();
    for v in 0..256u64 {
        bank.write(v as usize, v).unwrap();
    }
    // every ternary query over 8 symbols: 3^8 of them
    for code in 0..6561u32 {
        let (mut value, mut care, mut c) = (0u64, 0u64, code);
        for i in 0..8 {
            match c % 3 {
                0 => care |= 1 << i,
                1 => {
                    care |= 1 << i;
                    value |= 1 << i;
                }
                _ => {}
            }
            c /= 3;
        }
        let q = TernaryWord::new(8, value, care).unwrap();
        let expect: Vec<usize> = (0..256)
            .filter(|&v| brute_match(v as u64, 0xFF, &q))
            .collect();
        assert_eq!(bank.search_exact(&q).unwrap(), expect);
        let best = (0..256usize)
            .map(|v| (brute_distance(v as u64, 0xFF, &q), v))
            .min()
            .unwrap();
        assert_eq!(bank.search_best(&q).unwrap(), (best.1, best.0));
    }
}

#[test]
fn prefix_block_law_twelve_bits() {
    let width = 12;
    for delta in 1u32..(1 << width) {
        let mask = prefix_mask(delta).unwrap() as u64;
        let p = 31 - delta.leading_zeros();
        assert_eq!(mask, (1u64 << (p + 1)) - 1);
        for v in (0u64..(1 << width)).step_by(29) {
            let q = frnn_query_width(v, mask, width).unwrap();
            let members: Vec<u64> = (0..(1u64 << width)).filter(|&x| q.matches(x)).collect();
            let lo = v / (mask + 1) * (mask + 1);
            let block: Vec<u64> = (lo..=(lo + mask).min((1 << width) - 1)).collect();
            assert_eq!(members, block, "v={v} delta={delta}");
            assert!(members.iter().all(|&x| x.abs_diff(v) < 2 * delta as u64));
        }
    }
}

#[test]
fn lfsr_follows_its_recurrence() {
    let mut l = Lfsr32::new(0x1234_5678).unwrap();
    let mut out = vec![l.state() & 1];
    for _ in 0..2000 {
        out.push(l.step() & 1);
    }
    for t in 0..out.len() - 32 {
        assert_eq!(
            out[t + 32],
            out[t] ^ out[t + 10] ^ out[t + 30] ^ out[t + 31],
            "t = {t}"
        );
    }
}

/// `a * b mod poly` over GF(2), degree 32.
fn mulmod(mut a: u64, mut b: u64, poly: u64) -> u64 {
    let mut r = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> 32 & 1 == 1 {
            a ^= poly;
        }
    }
    r
}

fn x_pow(mut e: u64, poly: u64) -> u64 {
    let (mut base, mut acc) = (2u64, 1u64);
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, base, poly);
        }
        base = mulmod(base, base, poly);
        e >>= 1;
    }
    acc
}

#[test]
fn lfsr_polynomial_is_primitive() {
    // characteristic polynomial of the recurrence above: x^32 + x^31 + x^30 + x^10 + 1
    let poly = (1u64 << 32) | (1 << 31) | (1 << 30) | (1 << 10) | 1;
    let order = (1u64 << 32) - 1;
    assert_eq!(3 * 5 * 17 * 257 * 65537, order);
    assert_eq!(x_pow(order, poly), 1);
    for q in [3u64, 5, 17, 257, 65537] {
        assert_ne!(x_pow(order / q, poly), 1, "q = {q}");
    }
}

#[test]
fn lfsr_does_not_revisit_early() {
    let mut l = Lfsr32::new(1).unwrap();
    let mut seen = HashSet::with_capacity(1_000_001);
    seen.insert(l.state());
    for _ in 0..1_000_000 {
        let s = l.step();
        assert_ne!(s, 0);
        assert!(seen.insert(s));
    }
}

#[test]
fn urng_is_close_to_uniform() {
    let mut u = Urng::new(0xACE1).unwrap();
    let mut counts = [0u32; 4];
    let n = 400_000;
    for _ in 0..n {
        counts[u.below(4)] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 0.005, "{counts:?}");
    }
    for _ in 0..10_000 {
        let x = u.real_range(0.25, 0.5).unwrap();
        assert!((0.25..0.5).contains(&x));
    }
}
