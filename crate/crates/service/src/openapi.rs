use serde_json::{json, Value};

fn schema_ref(name: &str) -> Value {
    json!({ "$ref": format!("#/components/schemas/{name}") })
}

fn json_body(schema: Value) -> Value {
    json!({ "required": true, "content": { "application/json": { "schema": schema } } })
}

fn ok_json(description: &str, schema: Value) -> Value {
    json!({ "description": description, "content": { "application/json": { "schema": schema } } })
}

pub fn document() -> Value {
    let error = schema_ref("Error");
    let bad = ok_json("Validation failure", error.clone());
    let unavailable = ok_json("No model loaded", error.clone());
    let design_request = json!({
        "type": "object",
        "required": ["design"],
        "properties": { "design": schema_ref("GcsDesign") },
    });
    let number = json!({ "type": "number" });
    let design_fields = [
        "c4_base",
        "c4_top",
        "c8_base",
        "c8_top",
        "linear_twist",
        "osc_twist_amplitude",
        "osc_twist_cycles",
        "perimeter_ratio",
        "mass",
        "height",
        "thickness",
    ];
    let mut design_props = serde_json::Map::new();
    for f in design_fields {
        design_props.insert(f.into(), number.clone());
    }
    design_props.insert(
        "material".into(),
        json!({ "type": "string", "enum": ["PETG", "PLA", "TPE_Chinchilla75A", "TPU_Cheetah95A",
                                           "TPU_NinjaFlex85A", "TPU_Armadillo75D"] }),
    );
    let mut required: Vec<&str> = design_fields.to_vec();
    required.push("material");

    json!({
        "openapi": "3.0.3",
        "info": { "title": "GCS tandem network service", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/api/forward": { "post": {
                "summary": "Predict the force-displacement curve of a design",
                "requestBody": json_body(design_request.clone()),
                "responses": {
                    "200": ok_json("Predicted response", schema_ref("ForwardResponse")),
                    "400": bad, "503": unavailable,
                },
            }},
            "/api/inverse": { "post": {
                "summary": "Generate a design for a target curve",
                "requestBody": json_body(json!({
                    "type": "object",
                    "required": ["curve", "alpha"],
                    "properties": { "curve": schema_ref("Curve"), "alpha": number },
                })),
                "responses": {
                    "200": ok_json("Generated design", schema_ref("InverseResponse")),
                    "400": bad,
                    "404": ok_json("Unknown alpha; `available` lists the loaded values", error.clone()),
                    "503": unavailable,
                },
            }},
            "/api/mesh": { "post": {
                "summary": "Binary STL of a design",
                "requestBody": json_body(design_request),
                "responses": {
                    "200": { "description": "STL", "content": { "model/stl": {
                        "schema": { "type": "string", "format": "binary" } } } },
                    "400": bad, "503": unavailable,
                },
            }},
            "/api/health": { "get": {
                "summary": "Load state and bundle metadata",
                "responses": { "200": ok_json("Status", json!({ "type": "object",
                    "properties": { "status": { "type": "string", "enum": ["ok", "no-model"] } } })) },
            }},
            "/api/models": { "get": {
                "summary": "Loaded inverse models and format versions",
                "responses": {
                    "200": ok_json("Models", json!({ "type": "object", "properties": {
                        "alphas": { "type": "array", "items": number },
                        "versions": { "type": "object" } } })),
                    "503": unavailable,
                },
            }},
            "/api/spec": { "get": {
                "summary": "This document",
                "responses": { "200": { "description": "OpenAPI document" } },
            }},
        },
        "components": { "schemas": {
            "GcsDesign": { "type": "object", "required": required, "properties": design_props },
            "Curve": { "type": "object", "required": ["displacements", "forces"], "properties": {
                "displacements": { "type": "array", "items": number, "description": "mm, strictly increasing from 0" },
                "forces": { "type": "array", "items": number, "description": "N" } } },
            "Metrics": { "type": "object", "properties": {
                "stiffness": number, "work": number, "max_displacement": number } },
            "ForwardResponse": { "type": "object", "properties": {
                "performance": { "type": "array", "items": number, "minItems": 11, "maxItems": 11 },
                "curve": schema_ref("Curve"),
                "metrics": schema_ref("Metrics") } },
            "InverseResponse": { "type": "object", "properties": {
                "alpha": number,
                "design": schema_ref("GcsDesign"),
                "generated": { "type": "array", "items": number, "minItems": 17, "maxItems": 17 },
                "predicted_curve": schema_ref("Curve"),
                "predicted_metrics": schema_ref("Metrics"),
                "target_metrics": schema_ref("Metrics"),
                "metrics_delta": schema_ref("Metrics"),
                "printability": { "type": "object" },
                "displacement_clamped": { "type": "boolean" } } },
            "Error": { "type": "object", "required": ["error"], "properties": {
                "error": { "type": "string" },
                "details": { "type": "array", "items": { "type": "object" } },
                "available": { "type": "array", "items": number } } },
        }},
    })
}
