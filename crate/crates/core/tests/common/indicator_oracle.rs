//! Brute-force indicator oracles: plain loops over the textbook definitions.

use moe_trader::indicators::{self, IndicatorColumn};
use moe_trader::market_data::Bar;

pub const TOL: f64 = 1e-9;

pub fn close_enough(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + b.abs())
}

pub fn assert_column(col: &IndicatorColumn, oracle: &[Option<f64>], what: &str) {
    assert_eq!(col.values.len(), oracle.len(), "{what}: length");
    for (t, (got, want)) in col.values.iter().zip(oracle).enumerate() {
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => assert!(close_enough(*g, *w), "{what} at {t}: {g} vs {w}"),
            _ => panic!("{what} at {t}: definedness differs ({got:?} vs {want:?})"),
        }
    }
}

pub fn closes(b: &[Bar]) -> Vec<f64> {
    b.iter().map(|x| x.close).collect()
}

pub fn oracle_sma(x: &[f64], n: usize) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|t| (t + 1 >= n).then(|| x[t + 1 - n..=t].iter().sum::<f64>() / n as f64))
        .collect()
}

pub fn oracle_ema(x: &[f64], n: usize) -> Vec<Option<f64>> {
    let a = 2.0 / (n as f64 + 1.0);
    let mut out = vec![None; x.len()];
    let mut prev: Option<f64> = None;
    for t in 0..x.len() {
        prev = match prev {
            None if t + 1 == n => Some(x[..n].iter().sum::<f64>() / n as f64),
            None => None,
            Some(e) => Some(a * x[t] + (1.0 - a) * e),
        };
        out[t] = prev;
    }
    out
}

/// Wilder RSI by the textbook recurrence on average gains and losses.
pub fn oracle_rsi(x: &[f64], n: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; x.len()];
    if x.len() <= n {
        return out;
    }
    let gains: Vec<f64> = (1..x.len()).map(|t| (x[t] - x[t - 1]).max(0.0)).collect();
    let losses: Vec<f64> = (1..x.len()).map(|t| (x[t - 1] - x[t]).max(0.0)).collect();
    let mut ag = gains[..n].iter().sum::<f64>() / n as f64;
    let mut al = losses[..n].iter().sum::<f64>() / n as f64;
    for t in n..x.len() {
        if t > n {
            ag = (ag * (n - 1) as f64 + gains[t - 1]) / n as f64;
            al = (al * (n - 1) as f64 + losses[t - 1]) / n as f64;
        }
        out[t] = Some(match (ag > 0.0, al > 0.0) {
            (_, true) => 100.0 - 100.0 / (1.0 + ag / al),
            (true, false) => 100.0,
            (false, false) => 50.0,
        });
    }
    out
}

pub fn oracle_tr(b: &[Bar]) -> Vec<f64> {
    (1..b.len())
        .map(|t| {
            let c = b[t - 1].close;
            [b[t].high - b[t].low, (b[t].high - c).abs(), (b[t].low - c).abs()]
                .into_iter()
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn oracle_atr(b: &[Bar], n: usize) -> Vec<Option<f64>> {
    let tr = oracle_tr(b);
    (0..b.len())
        .map(|t| (t >= n).then(|| tr[t - n..t].iter().sum::<f64>() / n as f64))
        .collect()
}

/// Wilder's ADX written out step by step from the DM/TR definitions.
pub fn oracle_adx(b: &[Bar], n: usize) -> (Vec<Option<f64>>, Vec<Option<f64>>, Vec<Option<f64>>) {
    let len = b.len();
    let tr = oracle_tr(b);
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for t in 1..len {
        let up = b[t].high - b[t - 1].high;
        let dn = b[t - 1].low - b[t].low;
        plus.push(if up > dn && up > 0.0 { up } else { 0.0 });
        minus.push(if dn > up && dn > 0.0 { dn } else { 0.0 });
    }
    let nf = n as f64;
    let (mut pdi, mut mdi, mut adx) = (vec![None; len], vec![None; len], vec![None; len]);
    let mut smooth = [0.0f64; 3];
    let mut dxs = Vec::new();
    for t in n..len {
        let i = t - 1;
        if t == n {
            smooth = [plus[..n].iter().sum(), minus[..n].iter().sum(), tr[..n].iter().sum()];
        } else {
            smooth[0] += plus[i] - smooth[0] / nf;
            smooth[1] += minus[i] - smooth[1] / nf;
            smooth[2] += tr[i] - smooth[2] / nf;
        }
        let p = if smooth[2] > 0.0 { 100.0 * smooth[0] / smooth[2] } else { 0.0 };
        let m = if smooth[2] > 0.0 { 100.0 * smooth[1] / smooth[2] } else { 0.0 };
        pdi[t] = Some(p);
        mdi[t] = Some(m);
        dxs.push(if p + m > 0.0 { 100.0 * (p - m).abs() / (p + m) } else { 0.0 });
        if dxs.len() == n {
            adx[t] = Some(dxs.iter().sum::<f64>() / nf);
        } else if dxs.len() > n {
            adx[t] = Some((adx[t - 1].unwrap() * (nf - 1.0) + dxs[dxs.len() - 1]) / nf);
        }
    }
    (adx, pdi, mdi)
}

pub fn oracle_kdj(b: &[Bar], n: usize) -> [Vec<Option<f64>>; 3] {
    let mut out = [vec![None; b.len()], vec![None; b.len()], vec![None; b.len()]];
    let (mut k, mut d) = (50.0, 50.0);
    for t in n - 1..b.len() {
        let w = &b[t + 1 - n..=t];
        let hh = w.iter().map(|x| x.high).fold(f64::MIN, f64::max);
        let ll = w.iter().map(|x| x.low).fold(f64::MAX, f64::min);
        let rsv = if hh == ll { 50.0 } else { (b[t].close - ll) / (hh - ll) * 100.0 };
        k = (2.0 * k + rsv) / 3.0;
        d = (2.0 * d + k) / 3.0;
        out[0][t] = Some(k);
        out[1][t] = Some(d);
        out[2][t] = Some(3.0 * k - 2.0 * d);
    }
    out
}

pub fn oracle_bollinger(x: &[f64], n: usize, k: f64) -> [Vec<Option<f64>>; 3] {
    let mut out = [vec![None; x.len()], vec![None; x.len()], vec![None; x.len()]];
    for t in n - 1..x.len() {
        let w = &x[t + 1 - n..=t];
        let m = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|v| v * v).sum::<f64>() / n as f64 - m * m;
        let sd = var.max(0.0).sqrt();
        out[0][t] = Some(m + k * sd);
        out[1][t] = Some(m);
        out[2][t] = Some(m - k * sd);
    }
    out
}

pub fn oracle_macd(x: &[f64]) -> [Vec<Option<f64>>; 3] {
    let fast = oracle_ema(x, 12);
    let slow = oracle_ema(x, 26);
    let dif: Vec<Option<f64>> = fast.iter().zip(&slow).map(|(f, s)| Some(f.as_ref()? - s.as_ref()?)).collect();
    let defined: Vec<f64> = dif.iter().flatten().copied().collect();
    let mut dea = vec![None; x.len() - defined.len()];
    dea.extend(oracle_ema(&defined, 9));
    let hist = dif.iter().zip(&dea).map(|(a, b)| Some(a.as_ref()? - b.as_ref()?)).collect();
    [dif, dea, hist]
}

pub fn oracle_donchian(b: &[Bar], n: usize) -> [Vec<Option<f64>>; 2] {
    let mut up = vec![None; b.len()];
    let mut lo = vec![None; b.len()];
    for t in n..b.len() {
        let mut h = b[t - 1].high;
        let mut l = b[t - 1].low;
        for x in &b[t - n..t - 1] {
            h = if x.high > h { x.high } else { h };
            l = if x.low < l { x.low } else { l };
        }
        up[t] = Some(h);
        lo[t] = Some(l);
    }
    [up, lo]
}

/// Checks every indicator on one series, panicking on the first mismatch.
pub fn check_all(b: &[Bar]) {
    let x = closes(b);
    for n in [1, 5, 10, 20] {
        assert_column(&indicators::sma(&x, n).unwrap(), &oracle_sma(&x, n), "sma");
    }
    for n in [1, 9, 12] {
        assert_column(&indicators::ema(&x, n).unwrap(), &oracle_ema(&x, n), "ema");
    }
    for n in [6, 14] {
        assert_column(&indicators::rsi(&x, n).unwrap(), &oracle_rsi(&x, n), "rsi");
    }
    for k in [0.0, 1.8, 2.0] {
        let bands = indicators::bollinger(&x, 20, k).unwrap();
        let o = oracle_bollinger(&x, 20, k);
        assert_column(&bands.upper, &o[0], "boll upper");
        assert_column(&bands.middle, &o[1], "boll middle");
        assert_column(&bands.lower, &o[2], "boll lower");
    }
    let kdj = indicators::kdj(b, 9).unwrap();
    let o = oracle_kdj(b, 9);
    assert_column(&kdj.k, &o[0], "kdj k");
    assert_column(&kdj.d, &o[1], "kdj d");
    assert_column(&kdj.j, &o[2], "kdj j");
    let macd = indicators::macd(&x).unwrap();
    let o = oracle_macd(&x);
    assert_column(&macd.dif, &o[0], "macd dif");
    assert_column(&macd.dea, &o[1], "macd dea");
    assert_column(&macd.hist, &o[2], "macd hist");
    assert_column(&indicators::atr(b, 14).unwrap(), &oracle_atr(b, 14), "atr");
    let adx = indicators::adx_di(b, 14).unwrap();
    let (a, p, m) = oracle_adx(b, 14);
    assert_column(&adx.adx, &a, "adx");
    assert_column(&adx.plus_di, &p, "+di");
    assert_column(&adx.minus_di, &m, "-di");
    for n in [10, 20] {
        let ch = indicators::donchian(b, n).unwrap();
        let o = oracle_donchian(b, n);
        assert_column(&ch.upper, &o[0], "donchian upper");
        assert_column(&ch.lower, &o[1], "donchian lower");
    }
}

