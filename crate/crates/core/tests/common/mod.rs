//! Literal transcriptions of the scheduling pseudocode, used as
//! brute-force oracles. 1-based indices and stable sorts as written.

#![allow(dead_code)]

use lhs_core::scheduler::SlotKind;

pub fn oracle_sort_desc(v: &[u32]) -> Vec<usize> {
    // Stable descending sort returning 1-based indices.
    let mut idx: Vec<usize> = (1..=v.len()).collect();
    for a in 1..idx.len() {
        let mut b = a;
        while b > 0 && v[idx[b - 1] - 1] < v[idx[b] - 1] {
            idx.swap(b - 1, b);
            b -= 1;
        }
    }
    idx
}

pub fn oracle_alg1(total: &[u32]) -> Vec<usize> {
    let sorted = oracle_sort_desc(total);
    let mut lsa_req = Vec::new();
    for i in 1..=3 {
        if i <= sorted.len() && total[sorted[i - 1] - 1] > 0 {
            lsa_req.push(sorted[i - 1] - 1);
        }
    }
    lsa_req
}

pub fn oracle_alg2_cell(count: &[u32], hcg: &[u32], mm_flag: &[bool], thr_frac: f64, thr_total: u32) -> Vec<SlotKind> {
    let n = count.len();
    let s_idx = oracle_sort_desc(hcg);
    let mut hlsa_mm_flag: Vec<i32> = mm_flag.iter().map(|&f| f as i32).collect();
    let ok_hcg = |c: usize| count[c] > 0 && hcg[c] as f64 >= thr_frac * count[c] as f64;
    let mut ctr = 1;
    let mut mr = vec![-1i64; 7];
    let mut lp = vec![-1i64; 7];
    let mut hp = vec![-1i64; 7];
    for j in 1..=n {
        let c = s_idx[j - 1] - 1;
        if hlsa_mm_flag[c] != 1 && ctr <= 6 {
            if ok_hcg(c) {
                if count[c] > thr_total {
                    mr[ctr] = c as i64;
                    hlsa_mm_flag[c] = 1;
                    ctr += 1;
                } else {
                    mr[ctr] = -1;
                    lp[ctr] = c as i64;
                    hlsa_mm_flag[c] = 1;
                    let mut sr_flag = 1;
                    while sr_flag == 1 {
                        for k in j..=n {
                            let d = s_idx[k - 1] - 1;
                            if hlsa_mm_flag[d] != 1 && !ok_hcg(d) && count[d] > thr_total {
                                hp[ctr] = d as i64;
                                hlsa_mm_flag[d] = 1;
                                ctr += 1;
                                sr_flag = 0;
                                break;
                            }
                        }
                        if sr_flag == 1 {
                            // No partner: the lone candidate keeps its slot on the robust layer.
                            hp[ctr] = c as i64;
                            lp[ctr] = -1;
                            ctr += 1;
                            sr_flag = 0;
                        }
                    }
                }
            }
        }
    }
    (1..ctr)
        .map(|s| {
            if mr[s] >= 0 {
                SlotKind::Mr {
                    content: mr[s] as usize,
                }
            } else if lp[s] >= 0 {
                SlotKind::Sr {
                    hp: hp[s] as usize,
                    lp: lp[s] as usize,
                }
            } else {
                SlotKind::SrHpOnly {
                    content: hp[s] as usize,
                }
            }
        })
        .collect()
}

pub fn oracle_alg3(c: [u32; 3], tc: [u32; 3]) -> [f64; 3] {
    let s_c = oracle_sort_desc(&c);
    let s_tc = oracle_sort_desc(&tc);
    let sorted_c: Vec<u32> = s_c.iter().map(|&i| c[i - 1]).collect();
    let sorted_tc: Vec<u32> = s_tc.iter().map(|&i| tc[i - 1]).collect();
    let unique = |v: &[u32]| v[0] != v[1] && v[1] != v[2] && v[0] != v[2];
    let equal = |v: &[u32]| v[0] == v[1] && v[1] == v[2];
    let mut alpha = [0.5, 0.3, 0.1];
    let mut set = |inds: &[usize], vals: [f64; 3]| {
        for k in 0..3 {
            alpha[inds[k] - 1] = vals[k];
        }
    };
    if unique(&sorted_c) {
        set(&s_c, [0.5, 0.3, 0.1]);
    } else if equal(&sorted_c) {
        if unique(&sorted_tc) {
            set(&s_tc, [0.5, 0.3, 0.1]);
        } else if equal(&sorted_tc) {
            // unchanged
        } else if sorted_tc[0] == sorted_tc[1] {
            set(&s_tc, [0.5, 0.3, 0.1]);
        } else {
            set(&s_tc, [0.5, 0.3, 0.1]);
        }
    } else if sorted_c[0] == sorted_c[1] {
        if tc[s_c[0] - 1] >= tc[s_c[1] - 1] {
            set(&s_c, [0.5, 0.3, 0.1]);
        } else {
            set(&s_c, [0.3, 0.5, 0.1]);
        }
    } else if tc[s_c[1] - 1] >= tc[s_c[2] - 1] {
        set(&s_c, [0.5, 0.3, 0.1]);
    } else {
        set(&s_c, [0.5, 0.1, 0.3]);
    }
    alpha
}
