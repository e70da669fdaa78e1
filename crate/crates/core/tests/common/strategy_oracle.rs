//! Line-by-line simulation oracle for the eight rule strategies.
//!
//! Everything here is recomputed from raw bars on every step: indicators
//! are brute-force window scans or full recursions from the first bar, and
//! the decision rules are transcribed branch by branch from the algorithm
//! listings plus the documented interpretations (sizing score, add-layer
//! increments, divergence and false-break predicates). Nothing is shared
//! with the library beyond the parameter record and the bar type.

use moe_trader::market_data::Bar;
use moe_trader::strategy::StrategyParams;

/// One bar of a replay: the order, the state after it, and the equity mark.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: usize,
    pub verb: &'static str,
    pub fraction: f64,
    pub position: i8,
    pub layers: usize,
    pub stop: Option<f64>,
    pub equity: f64,
}

/// Tab-separated trace; floats use the shortest exact round-trip form.
pub fn render(rows: &[Row]) -> String {
    let mut out = String::from("t\tverb\tfraction\tposition\tlayers\tstop\tequity\n");
    for r in rows {
        let stop = r.stop.map_or("-".to_string(), |s| format!("{s}"));
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.t, r.verb, r.fraction, r.position, r.layers, stop, r.equity
        ));
    }
    out
}

// ---- indicators, recomputed from scratch --------------------------------

fn close(b: &[Bar], t: usize) -> f64 {
    b[t].close
}

fn sma(b: &[Bar], t: usize, n: usize) -> Option<f64> {
    if t + 1 < n {
        return None;
    }
    let mut s = 0.0;
    for i in t + 1 - n..=t {
        s += b[i].close;
    }
    Some(s / n as f64)
}

fn true_range(b: &[Bar], t: usize) -> f64 {
    let pc = b[t - 1].close;
    let hi = if b[t].high > pc { b[t].high } else { pc };
    let lo = if b[t].low < pc { b[t].low } else { pc };
    hi - lo
}

fn atr(b: &[Bar], t: usize, n: usize) -> Option<f64> {
    if t < n {
        return None;
    }
    let mut s = 0.0;
    for i in t + 1 - n..=t {
        s += true_range(b, i);
    }
    Some(s / n as f64)
}

/// Wilder RSI by full recursion from bar 1.
fn rsi(b: &[Bar], t: usize, n: usize) -> Option<f64> {
    if t < n {
        return None;
    }
    let nf = n as f64;
    let (mut g, mut l) = (0.0, 0.0);
    for i in 1..=n {
        let d = b[i].close - b[i - 1].close;
        if d > 0.0 {
            g += d;
        } else {
            l -= d;
        }
    }
    g /= nf;
    l /= nf;
    for i in n + 1..=t {
        let d = b[i].close - b[i - 1].close;
        let (up, down) = if d > 0.0 { (d, 0.0) } else { (0.0, -d) };
        g = (g * (nf - 1.0) + up) / nf;
        l = (l * (nf - 1.0) + down) / nf;
    }
    Some(if l == 0.0 {
        if g == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + g / l)
    })
}

/// (K, D, J) at `t`, recursing from the first full window with K = D = 50.
fn kdj(b: &[Bar], t: usize, n: usize) -> Option<(f64, f64, f64)> {
    if t + 1 < n {
        return None;
    }
    let (mut k, mut d) = (50.0, 50.0);
    for i in n - 1..=t {
        let mut hh = f64::NEG_INFINITY;
        let mut ll = f64::INFINITY;
        for bar in &b[i + 1 - n..=i] {
            hh = hh.max(bar.high);
            ll = ll.min(bar.low);
        }
        let rsv = if hh > ll { 100.0 * (b[i].close - ll) / (hh - ll) } else { 50.0 };
        k = 2.0 / 3.0 * k + rsv / 3.0;
        d = 2.0 / 3.0 * d + k / 3.0;
    }
    Some((k, d, 3.0 * k - 2.0 * d))
}

/// (upper, middle, lower) with the population deviation.
fn bollinger(b: &[Bar], t: usize, n: usize, k: f64) -> Option<(f64, f64, f64)> {
    let m = sma(b, t, n)?;
    let mut v = 0.0;
    for i in t + 1 - n..=t {
        v += (b[i].close - m) * (b[i].close - m);
    }
    let sd = (v / n as f64).sqrt();
    Some((m + k * sd, m, m - k * sd))
}

/// Highest high and lowest low of the `n` bars before `t`.
fn channel(b: &[Bar], t: usize, n: usize) -> Option<(f64, f64)> {
    if t < n {
        return None;
    }
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for bar in &b[t - n..t] {
        hi = hi.max(bar.high);
        lo = lo.min(bar.low);
    }
    Some((hi, lo))
}

fn volume_ratio(b: &[Bar], t: usize, n: usize) -> Option<f64> {
    if t < n {
        return None;
    }
    let mut s = 0.0;
    for bar in &b[t - n..t] {
        s += bar.volume;
    }
    let mean = s / n as f64;
    Some(if mean > 0.0 { b[t].volume / mean } else { 1.0 })
}

fn ret(b: &[Bar], t: usize, lag: usize) -> Option<f64> {
    if t < lag {
        return None;
    }
    Some((close(b, t) - close(b, t - lag)) / close(b, t - lag))
}

fn score(base: f64, step: f64, flags: &[bool]) -> f64 {
    let k = flags.iter().filter(|f| **f).count() as f64;
    let s = base + step * k;
    if s > 1.0 {
        1.0
    } else {
        s
    }
}

// ---- the simulated book -------------------------------------------------

#[derive(Debug, Clone, Default)]
struct Book {
    dir: i8,
    entries: Vec<f64>,
    sizes: Vec<f64>,
    stop: Option<f64>,
    exit: Option<f64>,
    entry_bar: usize,
    signal: Option<f64>,
}

impl Book {
    fn avg(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.entries.len() {
            num += self.entries[i] * self.sizes[i];
            den += self.sizes[i];
        }
        num / den
    }

    fn last(&self) -> f64 {
        self.entries[self.entries.len() - 1]
    }

    fn layers(&self) -> usize {
        self.entries.len()
    }

    fn add_size(&self) -> Option<f64> {
        let total: f64 = self.sizes.iter().sum();
        let mut s = self.sizes[0] / (self.layers() as f64 + 1.0);
        if s > 1.0 - total {
            s = 1.0 - total;
        }
        if s > 1e-12 {
            Some(s)
        } else {
            None
        }
    }

    fn profit(&self, price: f64) -> f64 {
        self.dir as f64 * (price - self.avg()) / self.avg()
    }
}

enum Act {
    Hold,
    Open { dir: i8, size: f64, stop: Option<f64>, exit: Option<f64>, signal: Option<f64> },
    Add { size: f64, signal: Option<f64> },
    Reduce,
    Close,
}

/// What an algorithm decides at one bar, with the dynamic stop it evaluated.
struct Step {
    act: Act,
    stop: Option<f64>,
}

fn hold(stop: Option<f64>) -> Step {
    Step { act: Act::Hold, stop }
}

/// Runs `decide` from `start` to the end, closing on the last bar and
/// marking a zero-fee portfolio at every close.
fn simulate(b: &[Bar], start: usize, cash: f64, mut decide: impl FnMut(&Book, usize) -> Step) -> Vec<Row> {
    let mut book = Book::default();
    let (mut cash, mut shares) = (cash, 0.0f64);
    let mut rows = Vec::new();
    let last = b.len() - 1;
    for t in start..=last {
        let price = close(b, t);
        let step = if t == last {
            if book.dir != 0 {
                Step { act: Act::Close, stop: None }
            } else {
                hold(None)
            }
        } else {
            decide(&book, t)
        };
        let equity = cash + shares * price;
        let (verb, fraction) = match step.act {
            Act::Hold => ("Hold", 0.0),
            Act::Open { dir, size, stop, exit, signal } => {
                book = Book {
                    dir,
                    entries: vec![price],
                    sizes: vec![size],
                    stop,
                    exit,
                    entry_bar: t,
                    signal,
                };
                if dir > 0 {
                    let f = size.min(cash / equity);
                    let q = f * equity / price;
                    shares += q;
                    cash -= q * price;
                    ("Buy", size)
                } else {
                    let q = -size * equity / price;
                    shares += q;
                    cash -= q * price;
                    ("Sell", size)
                }
            }
            Act::Add { size, signal } => {
                book.entries.push(price);
                book.sizes.push(size);
                book.entry_bar = t;
                if signal.is_some() {
                    book.signal = signal;
                }
                let q = if book.dir > 0 {
                    size.min(cash / equity) * equity / price
                } else {
                    -size * equity / price
                };
                shares += q;
                cash -= q * price;
                ("AddLayer", size)
            }
            Act::Reduce => {
                let total: f64 = book.sizes.iter().sum();
                let f = book.sizes[book.sizes.len() - 1] / total;
                book.entries.pop();
                book.sizes.pop();
                let q = -f * shares;
                shares += q;
                cash -= q * price;
                ("Reduce", f)
            }
            Act::Close => {
                book = Book::default();
                cash += shares * price;
                shares = 0.0;
                ("Close", 0.0)
            }
        };
        // Dynamic stops are the ones evaluated on this bar while the
        // position stays open; entry-fixed stops live on the book.
        if book.dir != 0 && !matches!(step.act, Act::Open { .. }) && step.stop.is_some() {
            book.stop = step.stop;
        }
        rows.push(Row {
            t,
            verb,
            fraction,
            position: book.dir,
            layers: book.layers(),
            stop: book.stop,
            equity: cash + shares * price,
        });
    }
    rows
}

fn open(dir: i8, size: f64) -> Step {
    Step {
        act: Act::Open { dir, size, stop: None, exit: None, signal: None },
        stop: None,
    }
}

// ---- Algorithm 1: MA cross ----------------------------------------------

pub fn ma_cross(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.ma_cross;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let f = sma(b, t, q.fast).unwrap();
        let s = sma(b, t, q.slow).unwrap();
        let f1 = sma(b, t - 1, q.fast).unwrap();
        let s1 = sma(b, t - 1, q.slow).unwrap();
        let a = atr(b, t, q.atr_period).unwrap();
        let tau = ret(b, t, 5).unwrap();
        let price = close(b, t);
        let golden = f1 <= s1 && f > s;
        let death = f1 >= s1 && f < s;
        let strength = (f - s).abs() / s > q.trend_threshold;
        if book.dir == 0 {
            if golden || (strength || tau > q.momentum_entry) {
                return open(1, score(z.base, z.per_confirmation, &[golden, strength, tau > q.momentum_entry]));
            }
            if death && tau < -q.exit_momentum {
                return open(-1, score(z.base, z.per_confirmation, &[death, strength, tau < -q.momentum_entry]));
            }
            return hold(None);
        }
        if book.dir > 0 {
            let mut m = q.atr_mult;
            if tau > 0.05 {
                m *= 1.5;
            } else if tau > 0.02 {
                m *= 1.2;
            }
            let stop = book.avg() - m * a;
            if price < stop && tau < -q.exit_momentum {
                return Step { act: Act::Close, stop: Some(stop) };
            }
            if death && tau < -q.exit_momentum {
                return Step { act: Act::Close, stop: Some(stop) };
            }
            if book.layers() < q.max_layers {
                let mut hi = f64::NEG_INFINITY;
                for i in t - q.breakout_lookback..t {
                    hi = hi.max(close(b, i));
                }
                let breakout = price > hi;
                let divergence = gap_shrinks(b, t, q.fast, q.slow, z.divergence_bars);
                let pullback = f > s && price > s && price < f;
                if [breakout, divergence, pullback].iter().filter(|x| **x).count() >= 2 {
                    if let Some(size) = book.add_size() {
                        return Step { act: Act::Add { size, signal: None }, stop: Some(stop) };
                    }
                }
            }
            return hold(Some(stop));
        }
        // Short side, mirrored.
        let mut m = q.atr_mult;
        if -tau > 0.05 {
            m *= 1.5;
        } else if -tau > 0.02 {
            m *= 1.2;
        }
        let stop = book.avg() + m * a;
        if price > stop && -tau < -q.exit_momentum {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if golden && -tau < -q.exit_momentum {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if book.layers() < q.max_layers {
            let mut lo = f64::INFINITY;
            for i in t - q.breakout_lookback..t {
                lo = lo.min(close(b, i));
            }
            let breakout = price < lo;
            let divergence = gap_shrinks(b, t, q.fast, q.slow, z.divergence_bars);
            let pullback = f < s && price > f && price < s;
            if [breakout, divergence, pullback].iter().filter(|x| **x).count() >= 2 {
                if let Some(size) = book.add_size() {
                    return Step { act: Act::Add { size, signal: None }, stop: Some(stop) };
                }
            }
        }
        hold(Some(stop))
    })
}

fn gap_shrinks(b: &[Bar], t: usize, fast: usize, slow: usize, bars: usize) -> bool {
    let gap = |i: usize| {
        let s = sma(b, i, slow).unwrap();
        (sma(b, i, fast).unwrap() - s).abs() / s
    };
    (t + 1 - bars..=t).all(|i| gap(i) < gap(i - 1))
}

// ---- Algorithm 2: momentum ----------------------------------------------

pub fn momentum(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.momentum;
    let z = &p.sizing;
    let blend = |t: usize| {
        0.5 * ret(b, t, q.lookback).unwrap() + 0.3 * ret(b, t, q.short).unwrap() + 0.2 * ret(b, t, q.long).unwrap()
    };
    simulate(b, start, cash, |book, t| {
        let mom = blend(t);
        let acc = mom - blend(t - q.accel_lag);
        let a = atr(b, t, q.atr_period).unwrap();
        let r = rsi(b, t, q.rsi_period).unwrap();
        let vr = volume_ratio(b, t, z.volume_window).unwrap();
        let price = close(b, t);
        let th = q.entry_threshold;
        if book.dir == 0 {
            let flags = [acc > 0.0, r > q.rsi_long, vr > q.volume_entry];
            if mom > th && flags.iter().any(|f| *f) {
                return open(1, score(z.base, z.per_confirmation, &flags));
            }
            if mom < -th && acc < 0.0 && r < q.rsi_short {
                return open(-1, score(z.base, z.per_confirmation, &[true, true, vr > q.volume_entry]));
            }
            return hold(None);
        }
        let d = book.dir as f64;
        let avg = book.avg();
        let stop = avg - d * q.atr_mult * a;
        let breached = if d > 0.0 { price < stop } else { price > stop };
        if breached || d * mom < q.exit_threshold {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if book.layers() < q.max_layers {
            let l = book.layers() as f64;
            let beyond = if d > 0.0 { price > avg * (1.0 + 0.01 * l) } else { price < avg * (1.0 - 0.01 * l) };
            let flags = [d * mom > th * (1.0 + 0.5 * l), beyond, d * acc > 0.5 * th, vr > q.volume_add];
            if flags.iter().filter(|f| **f).count() >= 2 {
                if let Some(size) = book.add_size() {
                    return Step { act: Act::Add { size, signal: None }, stop: Some(stop) };
                }
            }
        }
        hold(Some(stop))
    })
}

// ---- Algorithm 3: Turtle ------------------------------------------------

pub fn turtle(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.turtle;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let (eh, el) = channel(b, t, q.entry_period).unwrap();
        let (xh, xl) = channel(b, t, q.exit_period).unwrap();
        let a = atr(b, t, q.atr_period).unwrap();
        let vr = volume_ratio(b, t, z.volume_window).unwrap();
        let price = close(b, t);
        if book.dir == 0 {
            let size = score(z.base, z.per_confirmation, &[vr > q.volume_confirm, a / price < q.calm_atr]);
            if price > eh {
                return open(1, size);
            }
            if price < el {
                return open(-1, size);
            }
            return hold(None);
        }
        if book.dir > 0 {
            let stop = book.last() - q.atr_mult * a;
            if price < xl || price < stop {
                return Step { act: Act::Close, stop: Some(stop) };
            }
            if book.profit(price) > q.take_profit && book.layers() > 1 {
                return Step { act: Act::Reduce, stop: Some(stop) };
            }
            if book.layers() < q.max_units && price > book.last() + q.add_step * a {
                if let Some(size) = book.add_size() {
                    return Step { act: Act::Add { size, signal: None }, stop: Some(stop) };
                }
            }
            return hold(Some(stop));
        }
        let stop = book.last() + q.atr_mult * a;
        if price > xh || price > stop {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if book.profit(price) > q.take_profit && book.layers() > 1 {
            return Step { act: Act::Reduce, stop: Some(stop) };
        }
        if book.layers() < q.max_units && price < book.last() - q.add_step * a {
            if let Some(size) = book.add_size() {
                return Step { act: Act::Add { size, signal: None }, stop: Some(stop) };
            }
        }
        hold(Some(stop))
    })
}

// ---- Algorithm 4: Bollinger reversion -----------------------------------

pub fn boll(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.boll;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let (up, mid, lo) = bollinger(b, t, q.period, q.k).unwrap();
        let a = atr(b, t, q.atr_period).unwrap();
        let r = rsi(b, t, q.rsi_period).unwrap();
        let mom = ret(b, t, q.momentum_lag).unwrap();
        let vr = volume_ratio(b, t, z.volume_window).unwrap();
        let price = close(b, t);
        let vol_ok = vr > q.volume_confirm;
        if book.dir == 0 {
            if price < lo {
                let flags = [r < q.rsi_oversold, mom < 0.0, vol_ok];
                if flags.iter().any(|f| *f) {
                    return open(1, score(z.base, z.per_confirmation, &flags));
                }
            }
            if price > up {
                let flags = [r > q.rsi_overbought, mom > 0.0, vol_ok];
                if flags.iter().any(|f| *f) {
                    return open(-1, score(z.base, z.per_confirmation, &flags));
                }
            }
            return hold(None);
        }
        let long = book.dir > 0;
        let stop = if long { book.avg() - q.atr_mult * a } else { book.avg() + q.atr_mult * a };
        let target = if long { price >= mid && mom < 0.0 } else { price <= mid && mom > 0.0 };
        if target {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if (long && price < stop) || (!long && price > stop) {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if book.layers() < q.max_layers {
            let extreme = if long { price < lo && price < book.last() } else { price > up && price > book.last() };
            let waited = t >= book.entry_bar + q.add_after_bars;
            let mut outside = false;
            for i in t - q.false_break_bars..t {
                let (u, _, l) = bollinger(b, i, q.period, q.k).unwrap();
                outside |= if long { close(b, i) < l } else { close(b, i) > u };
            }
            let false_break = outside && if long { price >= lo } else { price <= up };
            if [extreme, waited, false_break].iter().filter(|x| **x).count() >= 2 {
                if let Some(size) = book.add_size() {
                    return Step { act: Act::Add { size, signal: None }, stop: Some(stop) };
                }
            }
        }
        hold(Some(stop))
    })
}

// ---- Algorithm 5: RSI reversion -----------------------------------------

/// (bullish, bearish): a new close extreme over the previous `n` bars that
/// the oscillator does not confirm.
fn divergence(b: &[Bar], osc: &dyn Fn(usize) -> f64, t: usize, n: usize) -> (bool, bool) {
    let (mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut omin, mut omax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in t - n..t {
        cmin = cmin.min(close(b, i));
        cmax = cmax.max(close(b, i));
        omin = omin.min(osc(i));
        omax = omax.max(osc(i));
    }
    let now = osc(t);
    (close(b, t) < cmin && now > omin, close(b, t) > cmax && now < omax)
}

pub fn rsi_reversion(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.rsi;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let osc = |i: usize| rsi(b, i, q.period).unwrap();
        let r = osc(t);
        let rmom = r - osc(t - 1);
        let trend = ret(b, t, q.trend_lag).unwrap();
        let spike = volume_ratio(b, t, z.volume_window).unwrap() > q.volume_spike;
        let (bull, bear) = divergence(b, &osc, t, q.divergence_lookback);
        let a = atr(b, t, q.atr_period).unwrap();
        let price = close(b, t);
        if book.dir == 0 {
            if r < q.oversold {
                let flags = [rmom > 0.0, spike, bull];
                if flags.iter().any(|f| *f) {
                    let size = score(z.base, z.per_confirmation, &flags);
                    return Step {
                        act: Act::Open { dir: 1, size, stop: None, exit: None, signal: Some(r) },
                        stop: None,
                    };
                }
            }
            if r > q.overbought && trend < q.flat_trend {
                let size = score(z.base, z.per_confirmation, &[rmom < 0.0, spike, bear]);
                return Step {
                    act: Act::Open { dir: -1, size, stop: None, exit: None, signal: Some(r) },
                    stop: None,
                };
            }
            return hold(None);
        }
        let long = book.dir > 0;
        let stop = if long { book.avg() - q.atr_mult * a } else { book.avg() + q.atr_mult * a };
        let reverted = if long { r > q.neutral && rmom < 0.0 } else { r < q.neutral && rmom > 0.0 };
        if reverted {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if (long && price < stop) || (!long && price > stop) {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        let zone = if long { r > q.profit_rsi } else { r < 100.0 - q.profit_rsi };
        if book.profit(price) > q.profit_target && zone {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if book.layers() < q.max_layers {
            let last_r = book.signal.unwrap_or(r);
            let flags = if long {
                [r < last_r, bull, price < book.last() * (1.0 - q.add_drop)]
            } else {
                [r > last_r, bear, price > book.last() * (1.0 + q.add_drop)]
            };
            if flags.iter().filter(|f| **f).count() >= 2 {
                if let Some(size) = book.add_size() {
                    return Step { act: Act::Add { size, signal: Some(r) }, stop: Some(stop) };
                }
            }
        }
        hold(Some(stop))
    })
}

// ---- Algorithm 6: KDJ reversion -----------------------------------------

pub fn kdj_reversion(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.kdj;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let (k, d, j) = kdj(b, t, q.period).unwrap();
        let (k1, d1, j1) = kdj(b, t - 1, q.period).unwrap();
        let jj = |i: usize| kdj(b, i, q.period).unwrap().2;
        let (bull, bear) = divergence(b, &jj, t, q.period);
        let golden = k1 <= d1 && k > d;
        let death = k1 >= d1 && k < d;
        let mom = ret(b, t, q.momentum_lag).unwrap();
        let vol_ok = volume_ratio(b, t, z.volume_window).unwrap() > q.volume_confirm;
        let a = atr(b, t, q.atr_period).unwrap();
        let price = close(b, t);
        if book.dir == 0 {
            if j < q.j_buy || k < q.k_buy {
                let flags = [golden, vol_ok, mom > 0.0];
                if flags.iter().any(|f| *f) {
                    let size = score(z.base, z.per_confirmation, &flags);
                    return Step {
                        act: Act::Open { dir: 1, size, stop: None, exit: None, signal: Some(j) },
                        stop: None,
                    };
                }
            }
            if j > q.j_sell && k > q.k_sell {
                let flags = [death, vol_ok, mom < 0.0];
                if flags.iter().any(|f| *f) {
                    let size = score(z.base, z.per_confirmation, &flags);
                    return Step {
                        act: Act::Open { dir: -1, size, stop: None, exit: None, signal: Some(j) },
                        stop: None,
                    };
                }
            }
            return hold(None);
        }
        let long = book.dir > 0;
        let stop = if long { book.avg() - q.atr_mult * a } else { book.avg() + q.atr_mult * a };
        let close_now = if long {
            (death && k > q.cross_exit_k)
                || (j > q.j_exit && j - j1 < -q.j_momentum_exit)
                || price < stop
                || (book.profit(price) > q.profit_target && (j > q.profit_level || k > q.profit_level))
        } else {
            (golden && k < 100.0 - q.cross_exit_k)
                || (j < 100.0 - q.j_exit && j - j1 > q.j_momentum_exit)
                || price > stop
                || (book.profit(price) > q.profit_target
                    && (j < 100.0 - q.profit_level || k < 100.0 - q.profit_level))
        };
        if close_now {
            return Step { act: Act::Close, stop: Some(stop) };
        }
        if book.layers() < q.max_layers {
            let last_j = book.signal.unwrap_or(j);
            let flags = if long { [j < last_j, golden, bull] } else { [j > last_j, death, bear] };
            if flags.iter().filter(|f| **f).count() >= 2 {
                if let Some(size) = book.add_size() {
                    return Step { act: Act::Add { size, signal: Some(j) }, stop: Some(stop) };
                }
            }
        }
        hold(Some(stop))
    })
}

// ---- Algorithm 7: volume breakout ---------------------------------------

pub fn volume_breakout(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.volume;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let (hi, lo) = channel(b, t, q.price_window).unwrap();
        let vr = volume_ratio(b, t, q.volume_window).unwrap();
        let ma = sma(b, t, q.ma_period).unwrap();
        let a = atr(b, t, q.atr_period).unwrap();
        let price = close(b, t);
        if book.dir == 0 {
            if price > hi && vr > q.volume_mult {
                let size = score(
                    z.base,
                    z.per_confirmation,
                    &[price > ma, vr > q.volume_strong, price - hi > q.breakout_atr * a],
                );
                let stop = Some(price - q.atr_mult * a);
                return Step { act: Act::Open { dir: 1, size, stop, exit: None, signal: None }, stop: None };
            }
            if price < lo && vr > q.volume_mult {
                let size = score(
                    z.base,
                    z.per_confirmation,
                    &[price < ma, vr > q.volume_strong, lo - price > q.breakout_atr * a],
                );
                let stop = Some(price + q.atr_mult * a);
                return Step { act: Act::Open { dir: -1, size, stop, exit: None, signal: None }, stop: None };
            }
            return hold(None);
        }
        let long = book.dir > 0;
        let stop = book.stop.unwrap();
        if (long && price < stop) || (!long && price > stop) || vr < q.exhaustion {
            return Step { act: Act::Close, stop: None };
        }
        let extends = if long { price > hi } else { price < lo };
        if extends && vr > q.volume_hold && book.layers() < q.max_layers {
            if let Some(size) = book.add_size() {
                return Step { act: Act::Add { size, signal: None }, stop: None };
            }
        }
        hold(None)
    })
}

// ---- Algorithm 8: ATR breakout ------------------------------------------

pub fn atr_breakout(b: &[Bar], p: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let q = &p.atr;
    let z = &p.sizing;
    simulate(b, start, cash, |book, t| {
        let ma = sma(b, t, q.ma_period).unwrap();
        let ma_then = sma(b, t - q.slope_lag, q.ma_period).unwrap();
        let a = atr(b, t, q.atr_period).unwrap();
        let vr = volume_ratio(b, t, z.volume_window).unwrap();
        let price = close(b, t);
        let upper = ma + q.entry_mult * a;
        let lower = ma - q.entry_mult * a;
        if book.dir == 0 {
            if price > upper {
                let size = score(
                    z.base,
                    z.per_confirmation,
                    &[ma > ma_then, vr > q.volume_confirm, price - upper > q.overshoot_atr * a],
                );
                let act = Act::Open {
                    dir: 1,
                    size,
                    stop: Some(price - q.stop_mult * a),
                    exit: Some(ma + q.exit_mult * a),
                    signal: None,
                };
                return Step { act, stop: None };
            }
            if price < lower {
                let size = score(
                    z.base,
                    z.per_confirmation,
                    &[ma < ma_then, vr > q.volume_confirm, lower - price > q.overshoot_atr * a],
                );
                let act = Act::Open {
                    dir: -1,
                    size,
                    stop: Some(price + q.stop_mult * a),
                    exit: Some(ma - q.exit_mult * a),
                    signal: None,
                };
                return Step { act, stop: None };
            }
            return hold(None);
        }
        let (stop, exit) = (book.stop.unwrap(), book.exit.unwrap());
        let out = if book.dir > 0 {
            price < stop || price < exit
        } else {
            price > stop || price > exit
        };
        if out {
            return Step { act: Act::Close, stop: None };
        }
        let continues = if book.dir > 0 { price > upper } else { price < lower };
        if continues && book.layers() < q.max_layers {
            if let Some(size) = book.add_size() {
                return Step { act: Act::Add { size, signal: None }, stop: None };
            }
        }
        hold(None)
    })
}
