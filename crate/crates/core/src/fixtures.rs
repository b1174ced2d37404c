//! Bundled example automata, terms and runs.

pub const FTT_TAB: &str = include_str!("../fixtures/ftt_tab.tabg");
pub const FTT_TAG: &str = include_str!("../fixtures/ftt_tag.tabg");
pub const MENU: &str = include_str!("../fixtures/menu.tabg");
pub const MENU_BTTA: &str = include_str!("../fixtures/menu_btta.tabg");
pub const KEYLIST: &str = include_str!("../fixtures/keylist.tabg");
pub const CURRY_DEMO: &str = include_str!("../fixtures/curry_demo.hag");
pub const CURRY_TERM: &str = include_str!("../fixtures/curry_demo.trm");
pub const MENU_TERM: &str = include_str!("../fixtures/menu_term.trm");
pub const MENU_RUN: &str = include_str!("../fixtures/menu_run.run");

/// `(name, file name, contents)` for every bundled file.
pub const ALL: &[(&str, &str, &str)] = &[
    ("ftt_tab", "ftt_tab.tabg", FTT_TAB),
    ("ftt_tag", "ftt_tag.tabg", FTT_TAG),
    ("menu", "menu.tabg", MENU),
    ("menu_btta", "menu_btta.tabg", MENU_BTTA),
    ("keylist", "keylist.tabg", KEYLIST),
    ("curry_demo", "curry_demo.hag", CURRY_DEMO),
    ("curry_term", "curry_demo.trm", CURRY_TERM),
    ("menu_term", "menu_term.trm", MENU_TERM),
    ("menu_run", "menu_run.run", MENU_RUN),
];

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, f, _)| *n == name || *f == name).map(|(_, _, s)| *s)
}
