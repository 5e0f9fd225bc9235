//! Event filter recomputed from the full per-pixel firing history.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveFilterParams {
    pub width: u16,
    pub height: u16,
    pub refractory_same_us: i64,
    pub refractory_opposite_us: i64,
    pub half_extent: i32,
    pub age_us: i64,
    pub min_support: usize,
    pub record_suppressed: bool,
}

#[derive(Debug, Default)]
pub struct NaiveFilter {
    params: Option<NaiveFilterParams>,
    /// Every recorded firing `(t, polarity)` per pixel.
    history: HashMap<(u16, u16), Vec<(i64, bool)>>,
}

impl NaiveFilter {
    pub fn new(params: NaiveFilterParams) -> Self {
        Self {
            params: Some(params),
            history: HashMap::new(),
        }
    }

    fn latest(&self, x: u16, y: u16, polarity: Option<bool>) -> Option<i64> {
        self.history.get(&(x, y))?.iter().filter(|(_, p)| polarity.is_none_or(|q| q == *p)).map(|(t, _)| *t).max()
    }

    /// `true` when the event passes. The event is then recorded.
    pub fn decide(&mut self, x: u16, y: u16, t: i64, on: bool) -> bool {
        let p = self.params.clone().expect("constructed with params");
        let since = |last: Option<i64>, period: i64| last.is_none_or(|l| t - l >= period);
        let refractory_ok = since(self.latest(x, y, Some(on)), p.refractory_same_us)
            && since(self.latest(x, y, Some(!on)), p.refractory_opposite_us);
        let pass = refractory_ok && {
            let mut support = 0;
            for dy in -p.half_extent..=p.half_extent {
                for dx in -p.half_extent..=p.half_extent {
                    let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= p.width as i32 || ny >= p.height as i32 {
                        continue;
                    }
                    if self.latest(nx as u16, ny as u16, None).is_some_and(|l| l >= t - p.age_us) {
                        support += 1;
                    }
                }
            }
            support >= p.min_support
        };
        if pass || p.record_suppressed {
            self.history.entry((x, y)).or_default().push((t, on));
        }
        pass
    }
}
