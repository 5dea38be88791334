//! Canonical `YYYY-YYYY` season strings from the shapes people type.

/// Recognizes `2015-2016`, `2015-16`, `2015/16`, `15-16`, `15/16` and the
/// same followed or preceded by words (`"16-17 season"`). Two-digit start
/// years are read as 20xx. The end year must follow the start year.
pub fn canonical_season(raw: &str) -> Option<String> {
    let runs: Vec<&str> = raw
        .split(|c: char| !c.is_ascii_digit())
        .filter(|r| !r.is_empty())
        .collect();
    let [start, end] = runs.as_slice() else {
        return None;
    };
    let start_year: u32 = match start.len() {
        4 => start.parse().ok()?,
        2 => 2000 + start.parse::<u32>().ok()?,
        _ => return None,
    };
    let end_year: u32 = match end.len() {
        4 => end.parse().ok()?,
        2 => {
            let yy: u32 = end.parse().ok()?;
            let century = start_year / 100 * 100;
            // 1999/00 style rollover
            if yy < start_year % 100 {
                century + 100 + yy
            } else {
                century + yy
            }
        }
        _ => return None,
    };
    (end_year == start_year + 1).then(|| format!("{start_year}-{end_year}"))
}
