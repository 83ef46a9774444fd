// Canvas skeleton rendering: joints as dots, bones as segments between a
// joint and its parent, drawn with a simple orthographic projection.

export interface Camera {
    scale: number; // pixels per meter
    yawDeg: number; // rotation about the vertical axis
    centerY: number; // vertical center in meters
}

export const DEFAULT_CAMERA: Camera = { scale: 140, yawDeg: 20, centerY: 0.8 };

function project(
    x: number,
    y: number,
    z: number,
    cam: Camera,
    width: number,
    height: number
): [number, number] {
    const yaw = (cam.yawDeg * Math.PI) / 180;
    const px = x * Math.cos(yaw) + z * Math.sin(yaw);
    return [width / 2 + px * cam.scale, height / 2 - (y - cam.centerY) * cam.scale];
}

export function drawSkeleton(
    ctx: CanvasRenderingContext2D,
    flat: number[],
    parents: number[],
    cam: Camera,
    color: string,
    lineWidth = 2
): void {
    const { width, height } = ctx.canvas;
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.lineWidth = lineWidth;
    const pts: [number, number][] = [];
    for (let j = 0; j < parents.length; j++) {
        pts.push(project(flat[3 * j], flat[3 * j + 1], flat[3 * j + 2], cam, width, height));
    }
    for (let j = 0; j < parents.length; j++) {
        const p = parents[j];
        if (p < 0) continue;
        ctx.beginPath();
        ctx.moveTo(pts[p][0], pts[p][1]);
        ctx.lineTo(pts[j][0], pts[j][1]);
        ctx.stroke();
    }
    for (const [x, y] of pts) {
        ctx.beginPath();
        ctx.arc(x, y, lineWidth + 1, 0, 2 * Math.PI);
        ctx.fill();
    }
}

export function clearCanvas(ctx: CanvasRenderingContext2D): void {
    ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    ctx.fillStyle = '#161a20';
    ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    // floor line
    const floor = project_y_zero(ctx);
    ctx.strokeStyle = '#2c3340';
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(0, floor);
    ctx.lineTo(ctx.canvas.width, floor);
    ctx.stroke();
}

function project_y_zero(ctx: CanvasRenderingContext2D): number {
    return ctx.canvas.height / 2 + DEFAULT_CAMERA.centerY * DEFAULT_CAMERA.scale;
}

/** Per-frame metric line chart; values come straight from the server. */
export function drawMetricChart(
    ctx: CanvasRenderingContext2D,
    series: Record<string, (number | null)[]>,
    playhead: number
): void {
    const { width, height } = ctx.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = '#161a20';
    ctx.fillRect(0, 0, width, height);
    const names = Object.keys(series).sort();
    const palette = ['#ff8c28', '#5aa0ff', '#7ddc8f', '#d98cff'];
    let lo = Infinity;
    let hi = -Infinity;
    for (const name of names) {
        for (const v of series[name]) {
            if (v === null) continue;
            lo = Math.min(lo, v);
            hi = Math.max(hi, v);
        }
    }
    if (!isFinite(lo) || hi - lo < 1e-9) return;
    const frames = series[names[0]]?.length ?? 0;
    names.forEach((name, i) => {
        ctx.strokeStyle = palette[i % palette.length];
        ctx.lineWidth = 1.5;
        ctx.beginPath();
        let started = false;
        for (let t = 0; t < frames; t++) {
            const v = series[name][t];
            if (v === null) {
                started = false;
                continue;
            }
            const x = (t / Math.max(1, frames - 1)) * width;
            const y = height - ((v - lo) / (hi - lo)) * (height - 6) - 3;
            if (started) ctx.lineTo(x, y);
            else ctx.moveTo(x, y);
            started = true;
        }
        ctx.stroke();
    });
    ctx.fillStyle = '#ffffff';
    ctx.fillRect((playhead / Math.max(1, frames - 1)) * width, 0, 1.5, height);
}

/** Timeline heat strip: one column per frame, intensity from the values. */
export function drawStrip(
    ctx: CanvasRenderingContext2D,
    values: number[],
    playhead: number,
    mask: boolean[] | null
): void {
    const { width, height } = ctx.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = '#161a20';
    ctx.fillRect(0, 0, width, height);
    if (values.length === 0) return;
    const peak = Math.max(1e-9, Math.max(...values));
    const bar = width / values.length;
    for (let t = 0; t < values.length; t++) {
        const intensity = values[t] / peak;
        if (mask && mask[t]) {
            ctx.fillStyle = `rgba(255, 140, 40, ${0.25 + 0.75 * intensity})`;
            ctx.fillRect(t * bar, 0, Math.max(1, bar - 0.5), height);
        } else if (intensity > 0) {
            ctx.fillStyle = `rgba(90, 160, 255, ${0.2 + 0.8 * intensity})`;
            ctx.fillRect(t * bar, 0, Math.max(1, bar - 0.5), height);
        }
    }
    ctx.fillStyle = '#ffffff';
    ctx.fillRect(playhead * bar, 0, 2, height);
}
