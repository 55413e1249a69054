/**
 * Wire protocol of the paint service, as zod schemas.
 *
 * Every outbound message is validated before it leaves the client; inbound
 * messages are validated before they touch any state. The protocol is JSON
 * text both ways, plus one binary PNG message following each frame header.
 */

import { z } from "zod";

export const vec3 = z.tuple([z.number(), z.number(), z.number()]);
export type Vec3 = z.infer<typeof vec3>;

export const brushSchema = z.object({
  shape: z.enum(["sphere", "cylinder", "box", "cone", "perlin"]),
  radius: z.number().positive(),
  rgba: z.tuple([
    z.number().min(0).max(1),
    z.number().min(0).max(1),
    z.number().min(0).max(1),
    z.number().min(0).max(1),
  ]),
  mode: z.enum(["paint", "erase", "recolor"]),
  pickup_strength: z.number().min(0).max(1),
  noise_seed: z.number().int(),
});
export type Brush = z.infer<typeof brushSchema>;

// client -> server
export const outbound = z.discriminatedUnion("type", [
  z.object({ type: z.literal("hello") }),
  z.object({ type: z.literal("set_brush"), brush: brushSchema }),
  z.object({ type: z.literal("stroke_begin") }),
  z.object({
    type: z.literal("stroke_sample"),
    pos: vec3,
    pressure: z.number().min(0).max(1),
    zoom: z.number().positive(),
  }),
  z.object({ type: z.literal("stroke_end") }),
  z.object({
    type: z.literal("set_camera"),
    eye: vec3,
    look: vec3,
    up: vec3.optional(),
    fov: z.number().gt(0).lt(180),
    size: z.tuple([z.number().int().positive(), z.number().int().positive()]),
  }),
  z.object({ type: z.literal("teleport"), room: z.string() }),
  z.object({
    type: z.literal("define_room"),
    name: z.string().min(1),
    min: vec3,
    max: vec3,
    scale: z.number().positive(),
  }),
  z.object({ type: z.literal("save"), path: z.string() }),
]);
export type Outbound = z.infer<typeof outbound>;

export const roomSchema = z.object({
  name: z.string(),
  min: vec3,
  max: vec3,
  scale: z.number(),
});
export type Room = z.infer<typeof roomSchema>;

// server -> client
export const inbound = z.discriminatedUnion("type", [
  z.object({
    type: z.literal("hello"),
    config: z.object({
      root_count_per_axis: z.number(),
      root_size: z.number(),
      max_depth: z.number(),
      extent: z.number(),
      background_rgba: z.array(z.number()).length(4),
    }),
    rooms: z.array(roomSchema),
  }),
  z.object({ type: z.literal("frame"), seq: z.number().int() }),
  z.object({
    type: z.literal("stats"),
    cells: z.number(),
    pool_pct: z.number(),
    dirty_blocks: z.number(),
    last_seq: z.number(),
    samples_echo: z.number(),
  }),
  z.object({ type: z.literal("error"), code: z.number(), msg: z.string() }),
]);
export type Inbound = z.infer<typeof inbound>;
