use crate::detect::Template;
use crate::VehicleClass;

type Shade = fn(usize, usize, usize, usize) -> f64;

/// Top-down luminance pattern of a vehicle body, without surroundings.
/// Taxis share the private-car shape and differ only in color.
pub fn body_template(class: VehicleClass) -> Template {
    let (w, h, shade): (usize, usize, Shade) = match class {
        VehicleClass::PrivateCar | VehicleClass::Taxi => (20, 10, car),
        VehicleClass::Pickup => (24, 11, pickup),
        VehicleClass::Bus => (40, 13, bus),
        VehicleClass::Motorcycle => (10, 4, motorcycle),
    };
    let data = (0..h)
        .flat_map(|y| (0..w).map(move |x| shade(x, y, w, h)))
        .collect();
    Template::new(w, h, data, None).expect("built-in patterns have contrast")
}

fn car(x: usize, y: usize, w: usize, h: usize) -> f64 {
    let edge = y == 0 || y == h - 1 || x == 0 || x == w - 1;
    match x {
        _ if edge => 150.0,
        // windshield, rear window
        4..=5 => 45.0,
        15 => 70.0,
        6..=14 => 230.0,
        _ => 200.0,
    }
}

fn pickup(x: usize, y: usize, w: usize, h: usize) -> f64 {
    let edge = y == 0 || y == h - 1 || x == 0 || x == w - 1;
    match x {
        _ if edge => 150.0,
        4..=5 => 45.0,
        6..=10 => 225.0,
        11 => 60.0,
        // open bed with side rails
        _ if y == 1 || y == h - 2 => 185.0,
        _ => 115.0,
    }
}

fn bus(x: usize, y: usize, w: usize, h: usize) -> f64 {
    let edge = y == 0 || y == h - 1 || x == 0 || x == w - 1;
    let unit = (10..=13).contains(&x) || (26..=29).contains(&x);
    match y {
        _ if edge => 140.0,
        // window bands along both sides
        1 => 60.0,
        _ if y == h - 2 => 60.0,
        _ if unit && (4..=h - 5).contains(&y) => 150.0,
        _ if x <= 2 => 70.0,
        _ => 225.0,
    }
}

fn motorcycle(x: usize, _y: usize, w: usize, _h: usize) -> f64 {
    match x {
        0 => 120.0,
        _ if x == w - 1 => 120.0,
        4..=6 => 55.0,
        _ => 195.0,
    }
}

pub fn default_color(class: VehicleClass) -> [u8; 3] {
    match class {
        VehicleClass::PrivateCar => [70, 100, 170],
        VehicleClass::Taxi => [235, 200, 40],
        VehicleClass::Pickup => [200, 200, 195],
        VehicleClass::Bus => [200, 70, 55],
        VehicleClass::Motorcycle => [60, 60, 60],
    }
}

/// Classes with their own shape, in export order.
pub const TEMPLATE_CLASSES: [VehicleClass; 4] = [
    VehicleClass::PrivateCar,
    VehicleClass::Pickup,
    VehicleClass::Bus,
    VehicleClass::Motorcycle,
];

/// Body pattern framed by `margin` pixels of plain road at `road_level`.
pub fn detector_template(class: VehicleClass, margin: usize, road_level: u8) -> Template {
    let body = body_template(class);
    let (w, h) = (body.width() + 2 * margin, body.height() + 2 * margin);
    let mut data = vec![road_level as f64; w * h];
    for y in 0..body.height() {
        for x in 0..body.width() {
            data[(y + margin) * w + x + margin] = body.get(x, y);
        }
    }
    Template::new(w, h, data, Some(class))
        .and_then(|t| t.with_margin(margin))
        .expect("margin fits")
}
