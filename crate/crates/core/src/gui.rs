//! Typed GUI context: app information, the page under test and its widgets,
//! parsed from UIAutomator-style view-hierarchy dumps and app manifests.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::normalize_name;

/// Nodes whose vertical centers differ by less than this fraction of the
/// page height share a reading-order row.
pub const ROW_BAND_FRACTION: f64 = 0.02;

/// Separator placed between nearby-widget texts when rendered.
pub const NEARBY_SEPARATOR: &str = " [SEP] ";

/// At most this many nearby texts (parent first, then closest siblings).
pub const MAX_NEARBY: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuiError {
    #[error("malformed hierarchy document: {0}")]
    MalformedDocument(String),
    #[error("page has no retained widgets")]
    EmptyPage,
    #[error("manifest is missing {0}")]
    MissingField(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppInfo {
    pub app_name: String,
    pub activities: Vec<String>,
}

impl AppInfo {
    /// Builds an `AppInfo`, trimming names and dropping duplicate activities
    /// (first occurrence wins).
    pub fn new(app_name: &str, activities: impl IntoIterator<Item = String>) -> Result<Self, GuiError> {
        let app_name = app_name.trim();
        if app_name.is_empty() {
            return Err(GuiError::MissingField("app name"));
        }
        let mut seen = HashSet::new();
        let activities: Vec<String> = activities
            .into_iter()
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty() && seen.insert(a.clone()))
            .collect();
        if activities.is_empty() {
            return Err(GuiError::MissingField("activities"));
        }
        Ok(Self { app_name: app_name.to_string(), activities })
    }

    pub fn declares(&self, activity: &str) -> bool {
        self.activities.iter().any(|a| a == activity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WidgetCategory {
    TextView,
    EditText,
    ImageView,
    Button,
    Other(String),
}

impl WidgetCategory {
    /// Maps an Android class name (`android.widget.EditText`) to a category.
    pub fn from_class(class: &str) -> Self {
        let short = class.rsplit('.').next().unwrap_or(class).trim();
        match short {
            "TextView" => Self::TextView,
            "ImageView" => Self::ImageView,
            s if s.ends_with("EditText") => Self::EditText,
            s if s.ends_with("Button") => Self::Button,
            "" => Self::Other("View".to_string()),
            s => Self::Other(s.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::TextView => "TextView",
            Self::EditText => "EditText",
            Self::ImageView => "ImageView",
            Self::Button => "Button",
            Self::Other(s) => s,
        }
    }
}

impl fmt::Display for WidgetCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WidgetAction {
    Click,
    Input,
    NonInteractive,
}

/// Screen rectangle in pixels, `[left,top][right,bottom]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Bounds {
    pub fn new(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Self { left, top, right, bottom }
    }

    pub fn center_x(&self) -> f64 {
        (f64::from(self.left) + f64::from(self.right)) / 2.0
    }

    pub fn center_y(&self) -> f64 {
        (f64::from(self.top) + f64::from(self.bottom)) / 2.0
    }

    /// Parses the UIAutomator `"[x1,y1][x2,y2]"` form.
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        let inner = raw.strip_prefix('[')?.strip_suffix(']')?;
        let (a, b) = inner.split_once("][")?;
        let point = |s: &str| -> Option<(i32, i32)> {
            let (x, y) = s.split_once(',')?;
            Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
        };
        let (l, t) = point(a)?;
        let (r, bm) = point(b)?;
        Some(Self::new(l, t, r, bm))
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}][{},{}]", self.left, self.top, self.right, self.bottom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetInfo {
    pub display_name: String,
    pub widget_text: Option<String>,
    pub widget_id: Option<String>,
    pub category: WidgetCategory,
    pub action: WidgetAction,
    pub nearby: Vec<String>,
    pub bounds: Bounds,
}

impl WidgetInfo {
    pub fn is_interactive(&self) -> bool {
        self.action != WidgetAction::NonInteractive
    }

    /// Identity used to count visits: the normalized text when present,
    /// else the resource id, else the display name.
    pub fn identity_key(&self) -> String {
        match (&self.widget_text, &self.widget_id) {
            (Some(t), _) => normalize_name(t),
            (None, Some(id)) => id.clone(),
            (None, None) => normalize_name(&self.display_name),
        }
    }

    pub fn nearby_text(&self) -> String {
        self.nearby.join(NEARBY_SEPARATOR)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuiPage {
    pub activity_name: String,
    pub widgets: Vec<WidgetInfo>,
    pub upper: Vec<String>,
    pub lower: Vec<String>,
    pub page_height: i32,
}

impl GuiPage {
    /// Assembles a page from widgets already in reading order and fills the
    /// upper/lower partition.
    pub fn new(activity_name: &str, widgets: Vec<WidgetInfo>, page_height: i32) -> Self {
        let mut page = Self {
            activity_name: activity_name.to_string(),
            widgets,
            upper: Vec::new(),
            lower: Vec::new(),
            page_height,
        };
        let (upper, lower) = classify_positions(&page);
        page.upper = upper;
        page.lower = lower;
        page
    }

    pub fn has_edit_text(&self) -> bool {
        self.widgets.iter().any(|w| w.category == WidgetCategory::EditText)
    }

    pub fn interactive(&self) -> impl Iterator<Item = &WidgetInfo> {
        self.widgets.iter().filter(|w| w.is_interactive())
    }

    pub fn find(&self, display_name: &str) -> Option<&WidgetInfo> {
        self.widgets.iter().find(|w| w.display_name == display_name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuiContext {
    pub app: AppInfo,
    pub page: GuiPage,
    /// The page's activity is not declared in the manifest.
    pub unknown_activity: bool,
}

impl GuiContext {
    pub fn new(app: AppInfo, page: GuiPage) -> Self {
        let unknown_activity = !app.declares(&page.activity_name);
        Self { app, page, unknown_activity }
    }
}

/// Splits a page's widgets into upper and lower halves. A widget is lower
/// iff its vertical center lies strictly below the middle of the page.
/// Reading order is preserved within each half.
pub fn classify_positions(page: &GuiPage) -> (Vec<String>, Vec<String>) {
    let middle = f64::from(page.page_height) / 2.0;
    let (lower, upper): (Vec<&WidgetInfo>, Vec<&WidgetInfo>) =
        page.widgets.iter().partition(|w| w.bounds.center_y() > middle);
    (
        upper.into_iter().map(|w| w.display_name.clone()).collect(),
        lower.into_iter().map(|w| w.display_name.clone()).collect(),
    )
}

/// Strips the `package:id/` prefix of a resource id.
fn short_resource_id(raw: &str) -> &str {
    let raw = raw.trim();
    match raw.rfind(":id/") {
        Some(pos) => &raw[pos + 4..],
        None => raw,
    }
}

fn non_empty(s: Option<&str>) -> Option<String> {
    s.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

struct RawNode<'a, 'input> {
    node: roxmltree::Node<'a, 'input>,
    text: Option<String>,
    hint: Option<String>,
    id: Option<String>,
    class: String,
    clickable: bool,
    bounds: Bounds,
}

/// Assigns each center to a row band. Centers are scanned in ascending
/// order; a new band opens when a center is at least `tolerance` below the
/// first center of the current band.
pub(crate) fn row_bands(centers: &[f64], tolerance: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut bands = vec![0; centers.len()];
    let mut band = 0;
    let mut anchor = None;
    for idx in order {
        match anchor {
            Some(a) if centers[idx] - a < tolerance => {}
            Some(_) => {
                band += 1;
                anchor = Some(centers[idx]);
            }
            None => anchor = Some(centers[idx]),
        }
        bands[idx] = band;
    }
    bands
}

/// Returns the permutation putting `bounds` into reading order: row band,
/// then left edge, then original position.
pub fn reading_order(bounds: &[Bounds], page_height: i32) -> Vec<usize> {
    let centers: Vec<f64> = bounds.iter().map(Bounds::center_y).collect();
    let bands = row_bands(&centers, ROW_BAND_FRACTION * f64::from(page_height.max(1)));
    let mut order: Vec<usize> = (0..bounds.len()).collect();
    order.sort_by_key(|&i| (bands[i], bounds[i].left, i));
    order
}

fn node_text(node: roxmltree::Node) -> Option<String> {
    non_empty(node.attribute("text"))
}

fn is_widget_node(node: &roxmltree::Node) -> bool {
    node.is_element() && node.tag_name().name() == "node"
}

/// Parent text first, then sibling texts ordered by distance in the child
/// list (earlier sibling wins ties). Never includes `own`.
fn nearby_texts(node: roxmltree::Node, own: Option<&str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let push = |t: String, out: &mut Vec<String>| {
        if Some(t.as_str()) != own && !out.contains(&t) && out.len() < MAX_NEARBY {
            out.push(t);
        }
    };
    if let Some(parent) = node.parent().filter(is_widget_node) {
        if let Some(t) = node_text(parent) {
            push(t, &mut out);
        }
    }
    let Some(parent) = node.parent() else { return out };
    let siblings: Vec<roxmltree::Node> = parent.children().filter(is_widget_node).collect();
    let Some(pos) = siblings.iter().position(|s| *s == node) else { return out };
    let mut ranked: Vec<(usize, usize)> = siblings
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != pos)
        .map(|(i, _)| (i.abs_diff(pos), i))
        .collect();
    ranked.sort();
    for (_, i) in ranked {
        if let Some(t) = node_text(siblings[i]) {
            push(t, &mut out);
        }
    }
    out
}

/// Parses a view-hierarchy dump into a [`GuiPage`].
///
/// Decorative nodes (no text, hint or resource id, and not interactive) are
/// dropped. Interactive nodes with no label are named after their first
/// nearby text, else `unlabeled_<reading index>`.
pub fn parse_view_hierarchy(document: &str, activity_name: &str) -> Result<GuiPage, GuiError> {
    let doc = roxmltree::Document::parse(document)
        .map_err(|e| GuiError::MalformedDocument(e.to_string()))?;
    let root = doc.root_element();

    let mut raw_nodes = Vec::new();
    for (doc_index, node) in root.descendants().filter(is_widget_node).enumerate() {
        let bounds = match node.attribute("bounds") {
            Some(b) => Bounds::parse(b).ok_or_else(|| {
                GuiError::MalformedDocument(format!("node {doc_index}: bad bounds {b:?}"))
            })?,
            None => {
                return Err(GuiError::MalformedDocument(format!("node {doc_index}: missing bounds")))
            }
        };
        raw_nodes.push(RawNode {
            node,
            text: node_text(node),
            hint: non_empty(node.attribute("hint-text")).or_else(|| non_empty(node.attribute("hint"))),
            id: non_empty(node.attribute("resource-id").map(short_resource_id)),
            class: node.attribute("class").unwrap_or("").to_string(),
            clickable: node.attribute("clickable").is_some_and(|c| c.trim().eq_ignore_ascii_case("true")),
            bounds,
        });
    }

    let page_height = root
        .attribute("height")
        .and_then(|h| h.trim().parse::<i32>().ok())
        .unwrap_or_else(|| raw_nodes.iter().map(|n| n.bounds.bottom).max().unwrap_or(0));

    let retained: Vec<RawNode> = raw_nodes
        .into_iter()
        .filter(|n| {
            let labeled = n.text.is_some() || n.hint.is_some() || n.id.is_some();
            let category = WidgetCategory::from_class(&n.class);
            labeled || n.clickable || category == WidgetCategory::EditText
        })
        .collect();
    if retained.is_empty() {
        return Err(GuiError::EmptyPage);
    }

    let bounds: Vec<Bounds> = retained.iter().map(|n| n.bounds).collect();
    let order = reading_order(&bounds, page_height);

    let widgets = order
        .into_iter()
        .enumerate()
        .map(|(reading_index, i)| {
            let n = &retained[i];
            let category = WidgetCategory::from_class(&n.class);
            let action = if category == WidgetCategory::EditText {
                WidgetAction::Input
            } else if n.clickable {
                WidgetAction::Click
            } else {
                WidgetAction::NonInteractive
            };
            let widget_text = n.text.clone().or_else(|| n.hint.clone());
            let nearby = nearby_texts(n.node, n.text.as_deref());
            let display_name = widget_text
                .clone()
                .or_else(|| n.id.clone())
                .or_else(|| nearby.first().cloned())
                .unwrap_or_else(|| format!("unlabeled_{reading_index}"));
            WidgetInfo {
                display_name,
                widget_text,
                widget_id: n.id.clone(),
                category,
                action,
                nearby,
                bounds: n.bounds,
            }
        })
        .collect();

    Ok(GuiPage::new(activity_name, widgets, page_height))
}

/// Normalizes a manifest activity class (`com.x.ui.AddAccountActivity`) to
/// its short name (`AddAccount`).
pub fn normalize_activity_name(raw: &str) -> String {
    let short = raw.trim().rsplit(['.', '$']).next().unwrap_or("").trim();
    match short.strip_suffix("Activity") {
        Some(stem) if !stem.is_empty() => stem.to_string(),
        _ => short.to_string(),
    }
}

#[derive(Deserialize)]
struct Descriptor {
    #[serde(alias = "name")]
    app_name: Option<String>,
    activities: Option<Vec<String>>,
    app: Option<Box<Descriptor>>,
}

/// Extracts app information from either an `AndroidManifest.xml` or a JSON
/// descriptor (`{"app_name", "activities"}`, possibly nested under `"app"`
/// as in app-model files).
pub fn extract_app_info(manifest: &str) -> Result<AppInfo, GuiError> {
    let trimmed = manifest.trim_start();
    if trimmed.starts_with('<') {
        return extract_from_manifest_xml(manifest);
    }
    let desc: Descriptor =
        serde_json::from_str(manifest).map_err(|e| GuiError::MalformedDocument(e.to_string()))?;
    let desc = match desc {
        Descriptor { app_name: None, activities: None, app: Some(inner) } => *inner,
        d => d,
    };
    let name = desc.app_name.ok_or(GuiError::MissingField("app name"))?;
    AppInfo::new(&name, desc.activities.unwrap_or_default())
}

const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

fn android_attr<'a>(node: roxmltree::Node<'a, '_>, name: &str) -> Option<&'a str> {
    node.attribute((ANDROID_NS, name)).or_else(|| node.attribute(name))
}

fn extract_from_manifest_xml(manifest: &str) -> Result<AppInfo, GuiError> {
    let doc = roxmltree::Document::parse(manifest)
        .map_err(|e| GuiError::MalformedDocument(e.to_string()))?;
    let root = doc.root_element();
    let application = root.children().find(|n| n.has_tag_name("application"));
    let label = application
        .and_then(|a| android_attr(a, "label"))
        .filter(|l| !l.trim().is_empty() && !l.starts_with('@'));
    let name = match label {
        Some(l) => l.to_string(),
        None => root
            .attribute("package")
            .and_then(|p| p.rsplit('.').next())
            .ok_or(GuiError::MissingField("app name"))?
            .to_string(),
    };
    let activities = root
        .descendants()
        .filter(|n| n.has_tag_name("activity") || n.has_tag_name("activity-alias"))
        .filter_map(|n| android_attr(n, "name"))
        .map(normalize_activity_name);
    AppInfo::new(&name, activities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(nodes: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?><hierarchy rotation="0" height="1000">{nodes}</hierarchy>"#
        )
    }

    #[test]
    fn text_view_is_non_interactive() {
        let xml = doc(r#"<node text="Welcome to the Money Tracker!" class="android.widget.TextView" clickable="false" bounds="[0,0][1080,200]"/>"#);
        let page = parse_view_hierarchy(&xml, "Main").unwrap();
        let w = &page.widgets[0];
        assert_eq!(w.display_name, "Welcome to the Money Tracker!");
        assert_eq!(w.category, WidgetCategory::TextView);
        assert_eq!(w.action, WidgetAction::NonInteractive);
    }

    #[test]
    fn resource_id_names_unlabeled_button() {
        let xml = doc(r#"<node text="" hint-text="" resource-id="com.example.money:id/add_account" class="android.widget.Button" clickable="true" bounds="[0,0][100,100]"/>"#);
        let page = parse_view_hierarchy(&xml, "Main").unwrap();
        let w = &page.widgets[0];
        assert_eq!(w.display_name, "add_account");
        assert_eq!(w.widget_id.as_deref(), Some("add_account"));
        assert_eq!(w.action, WidgetAction::Click);
    }

    #[test]
    fn empty_hierarchy_is_empty_page() {
        assert_eq!(parse_view_hierarchy("<hierarchy/>", "Main"), Err(GuiError::EmptyPage));
        let decorative = doc(r#"<node class="android.widget.FrameLayout" clickable="false" bounds="[0,0][10,10]"/>"#);
        assert_eq!(parse_view_hierarchy(&decorative, "Main"), Err(GuiError::EmptyPage));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(matches!(parse_view_hierarchy("<hierarchy>", "M"), Err(GuiError::MalformedDocument(_))));
        let bad_bounds = doc(r#"<node text="x" bounds="[0,0]"/>"#);
        assert!(matches!(parse_view_hierarchy(&bad_bounds, "M"), Err(GuiError::MalformedDocument(_))));
    }

    #[test]
    fn edit_text_takes_hint_and_input_action() {
        let xml = doc(r#"<node hint-text="Price" class="android.widget.EditText" clickable="true" bounds="[0,0][10,10]"/>"#);
        let page = parse_view_hierarchy(&xml, "Income").unwrap();
        assert_eq!(page.widgets[0].display_name, "Price");
        assert_eq!(page.widgets[0].action, WidgetAction::Input);
        assert!(page.has_edit_text());
    }

    #[test]
    fn nearby_uses_parent_and_siblings() {
        let xml = doc(concat!(
            r#"<node class="android.widget.LinearLayout" bounds="[0,400][1080,500]">"#,
            r#"<node text="your income:" class="android.widget.TextView" bounds="[0,400][300,500]"/>"#,
            r#"<node hint-text="Price" class="android.widget.EditText" clickable="true" bounds="[300,400][900,500]"/>"#,
            r#"<node text="$" class="android.widget.TextView" bounds="[900,400][1080,500]"/>"#,
            "</node>"
        ));
        let page = parse_view_hierarchy(&xml, "Income").unwrap();
        let price = page.find("Price").unwrap();
        assert_eq!(price.nearby_text(), "your income: [SEP] $");
        let names: Vec<_> = page.widgets.iter().map(|w| w.display_name.as_str()).collect();
        assert_eq!(names, ["your income:", "Price", "$"]);
    }

    #[test]
    fn unlabeled_interactive_falls_back() {
        let xml = doc(concat!(
            r#"<node class="android.widget.ImageButton" clickable="true" bounds="[0,0][10,10]"/>"#,
            r#"<node class="android.widget.LinearLayout" bounds="[0,100][100,200]">"#,
            r#"<node text="Delete row" class="android.widget.TextView" bounds="[0,100][50,200]"/>"#,
            r#"<node class="android.widget.ImageView" clickable="true" bounds="[50,100][100,200]"/>"#,
            "</node>"
        ));
        let page = parse_view_hierarchy(&xml, "Main").unwrap();
        assert_eq!(page.widgets[0].display_name, "unlabeled_0");
        assert_eq!(page.widgets[2].display_name, "Delete row");
        assert_eq!(page.widgets[2].nearby, vec!["Delete row"]);
    }

    #[test]
    fn positions_split_at_midline() {
        let w = |name: &str, top, bottom| WidgetInfo {
            display_name: name.into(),
            widget_text: Some(name.into()),
            widget_id: None,
            category: WidgetCategory::Button,
            action: WidgetAction::Click,
            nearby: vec![],
            bounds: Bounds::new(0, top, 100, bottom),
        };
        let page = GuiPage::new("Main", vec![w("top", 50, 150), w("bottom", 850, 950), w("mid", 450, 550)], 1000);
        let (upper, lower) = classify_positions(&page);
        assert_eq!(upper, vec!["top", "mid"]);
        assert_eq!(lower, vec!["bottom"]);
    }

    #[test]
    fn money_tracker_positions() {
        let xml = doc(concat!(
            r#"<node text="Welcome" class="android.widget.TextView" bounds="[0,100][1080,200]"/>"#,
            r#"<node text="Add Income" class="android.widget.Button" clickable="true" bounds="[0,800][1080,900]"/>"#,
        ));
        let page = parse_view_hierarchy(&xml, "Main").unwrap();
        assert_eq!(page.upper, vec!["Welcome"]);
        assert_eq!(page.lower, vec!["Add Income"]);
    }

    #[test]
    fn app_info_from_descriptor() {
        let info = extract_app_info(
            r#"{"app_name":"Money Tracker","activities":["Main","AddAccount","Import","Income","Main"]}"#,
        )
        .unwrap();
        assert_eq!(info.app_name, "Money Tracker");
        assert_eq!(info.activities, ["Main", "AddAccount", "Import", "Income"]);
        let nested = extract_app_info(r#"{"schema_version":1,"app":{"app_name":"X","activities":["A"]}}"#).unwrap();
        assert_eq!(nested.activities, ["A"]);
        assert_eq!(
            extract_app_info(r#"{"app_name":"X","activities":[]}"#),
            Err(GuiError::MissingField("activities"))
        );
        assert_eq!(extract_app_info(r#"{"activities":["A"]}"#), Err(GuiError::MissingField("app name")));
    }

    #[test]
    fn app_info_from_manifest_xml() {
        let xml = r#"<manifest xmlns:android="http://schemas.android.com/apk/res/android" package="com.blogspot.e_kanivets.moneytracker">
            <application android:label="@string/app_name">
              <activity android:name=".activity.MainActivity"/>
              <activity android:name=".activity.account.AddAccountActivity"/>
              <activity android:name="com.blogspot.e_kanivets.moneytracker.activity.ImportActivity"/>
              <activity android:name=".activity.MainActivity"/>
            </application></manifest>"#;
        let info = extract_app_info(xml).unwrap();
        assert_eq!(info.app_name, "moneytracker");
        assert_eq!(info.activities, ["Main", "AddAccount", "Import"]);
    }

    #[test]
    fn category_mapping() {
        assert_eq!(WidgetCategory::from_class("android.widget.ImageButton"), WidgetCategory::Button);
        assert_eq!(WidgetCategory::from_class("android.widget.Switch"), WidgetCategory::Other("Switch".into()));
        assert_eq!(Bounds::parse("[1,2][3,4]"), Some(Bounds::new(1, 2, 3, 4)));
        assert_eq!(Bounds::parse("[1,2][3]"), None);
    }

    fn arb_node() -> impl Strategy<Value = (String, String, String, bool)> {
        let field = prop_oneof![Just(String::new()), Just("  ".to_string()), "[a-z]{1,6}"];
        (field.clone(), field.clone(), field, any::<bool>())
    }

    proptest! {
        #[test]
        fn display_name_priority(nodes in prop::collection::vec(arb_node(), 1..8)) {
            let body: String = nodes.iter().enumerate().map(|(i, (t, h, id, click))| {
                format!(r#"<node text="{t}" hint-text="{h}" resource-id="{id}" class="android.widget.Button" clickable="{click}" bounds="[0,{}][100,{}]"/>"#, i * 100, i * 100 + 50)
            }).collect();
            let retained: Vec<_> = nodes.iter().filter(|(t, h, id, click)| {
                !t.trim().is_empty() || !h.trim().is_empty() || !id.trim().is_empty() || *click
            }).collect();
            match parse_view_hierarchy(&doc(&body), "P") {
                Err(GuiError::EmptyPage) => prop_assert!(retained.is_empty()),
                Err(e) => prop_assert!(false, "unexpected {e}"),
                Ok(page) => {
                    prop_assert_eq!(page.widgets.len(), retained.len());
                    for (w, (t, h, id, _)) in page.widgets.iter().zip(retained) {
                        let expected = [t, h, id].into_iter().map(|s| s.trim()).find(|s| !s.is_empty());
                        match expected {
                            Some(e) => prop_assert_eq!(&w.display_name, e),
                            None => prop_assert!(!w.display_name.is_empty()),
                        }
                    }
                }
            }
        }

        #[test]
        fn partition_is_exhaustive_and_disjoint(
            rects in prop::collection::vec((0i32..1000, 0i32..1900, 1i32..80, 1i32..200), 1..20)
        ) {
            let body: String = rects.iter().enumerate().map(|(i, (x, y, w, h))| {
                format!(r#"<node text="w{i}" class="android.widget.TextView" bounds="[{x},{y}][{},{}]"/>"#, x + w, y + h)
            }).collect();
            let xml = format!(r#"<hierarchy height="2000">{body}</hierarchy>"#);
            let page = parse_view_hierarchy(&xml, "P").unwrap();
            let mut all: Vec<String> = page.upper.iter().chain(&page.lower).cloned().collect();
            all.sort();
            let mut names: Vec<String> = page.widgets.iter().map(|w| w.display_name.clone()).collect();
            names.sort();
            prop_assert_eq!(all, names);
            for w in &page.widgets {
                let is_lower = page.lower.contains(&w.display_name);
                prop_assert_eq!(is_lower, w.bounds.center_y() > 1000.0);
            }
        }

        #[test]
        fn reading_order_matches_brute_force(
            rects in prop::collection::vec((0i32..1000, 0i32..1900), 1..25)
        ) {
            let bounds: Vec<Bounds> = rects.iter().map(|&(x, y)| Bounds::new(x, y, x + 50, y + 40)).collect();
            let order = reading_order(&bounds, 2000);
            // independent banding: walk centers ascending, open a band whenever
            // the gap to the band's first member reaches the tolerance
            let tol = 0.02 * 2000.0;
            let mut sorted: Vec<f64> = bounds.iter().map(|b| b.center_y()).collect();
            sorted.sort_by(f64::total_cmp);
            let mut starts: Vec<f64> = Vec::new();
            for c in sorted {
                if starts.last().is_none_or(|s| c - s >= tol) {
                    starts.push(c);
                }
            }
            let band = |b: &Bounds| starts.iter().filter(|s| **s <= b.center_y()).count();
            let mut expected: Vec<usize> = (0..bounds.len()).collect();
            // brute-force selection sort on the (band, left, index) key
            for i in 0..expected.len() {
                for j in i + 1..expected.len() {
                    let (a, b) = (expected[i], expected[j]);
                    if (band(&bounds[b]), bounds[b].left, b) < (band(&bounds[a]), bounds[a].left, a) {
                        expected.swap(i, j);
                    }
                }
            }
            prop_assert_eq!(order, expected);
        }
    }
}
